"""Dense bounded-variable simplex for desk-scale LPs.

Solves ``min c.x  s.t.  A x (<=|>=|=) b,  lb <= x <= ub`` with a full tableau.
Every row gets a slack (bounds encode the sense) and, for cold starts, an
artificial variable; phase 1 drives the artificials to zero and phase 2
optimizes the real objective. A warm basis from a previous solve is
re-factorized and, when it is dual feasible but primal infeasible (the usual
situation after a branching bound change), finished with the dual simplex.

Pivot rule is Dantzig pricing with a switch to Bland's rule after a run of
degenerate pivots, so the method is deterministic and cannot cycle. Outside
Bland mode the ratio test is Harris's two-pass rule, and the tableau is rebuilt
from the original columns every few hundred pivots to keep round-off bounded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import kernels

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"

AT_LB, AT_UB, FREE, BASIC = 0, 1, 2, 3

FEAS_TOL = 1e-7
OPT_TOL = 1e-7
PIV_TOL = 1e-7
DEGENERATE_RUN = 30
REFACTOR_MIN = 50  # tableau rebuilds happen every max(REFACTOR_MIN, m // 3) pivots


@dataclass
class LpProblem:
    c: np.ndarray
    A: np.ndarray
    senses: np.ndarray  # "<=", ">=", "="
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if self.A.size == 0:
            self.A = self.A.reshape(0, self.c.shape[0])
        self.senses = np.asarray(self.senses, dtype=object)
        self.b = np.asarray(self.b, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)

    @property
    def shape(self):
        return self.A.shape


@dataclass
class Basis:
    """Basic column per row plus a bound status for every column (structurals then slacks)."""

    basic: np.ndarray
    status: np.ndarray


@dataclass
class LpSolution:
    status: str
    x: Optional[np.ndarray] = None
    objective: float = float("nan")
    basis: Optional[Basis] = None
    duals: Optional[np.ndarray] = None
    iterations: int = 0
    reduced_costs: Optional[np.ndarray] = field(default=None, repr=False)


class _Tableau:
    """Working state shared by the primal and dual loops."""

    def __init__(self, lp: LpProblem, with_artificials: bool):
        m, n = lp.A.shape
        self.m, self.n = m, n
        slack_lb = np.where(lp.senses == ">=", -np.inf, 0.0).astype(float)
        slack_ub = np.where(lp.senses == "<=", np.inf, 0.0).astype(float)
        self.lb = np.concatenate([lp.lb, slack_lb])
        self.ub = np.concatenate([lp.ub, slack_ub])
        self.ncols = n + m + (m if with_artificials else 0)
        if with_artificials:
            self.lb = np.concatenate([self.lb, np.zeros(m)])
            self.ub = np.concatenate([self.ub, np.full(m, np.inf)])
        self.full = np.hstack([lp.A, np.eye(m)])
        self.b = lp.b.copy()
        # original columns and rhs of the system the tableau represents
        self.orig = self.full if not with_artificials else np.hstack([self.full, np.eye(m)])
        self.rhs = self.b
        self.cost = np.zeros(self.ncols)
        self.cost[:n] = lp.c
        self.x = np.zeros(self.ncols)
        self.status = np.zeros(self.ncols, dtype=np.int64)
        self.basic = np.zeros(m, dtype=np.int64)
        self.tab = np.zeros((m + 1, self.ncols))
        self.refactor_every = max(REFACTOR_MIN, m // 3)
        self.blocked = np.zeros(self.ncols, dtype=bool)
        self.iterations = 0

    # -- helpers ------------------------------------------------------------

    def place_nonbasic(self, j, prefer=None):
        lo, hi = self.lb[j], self.ub[j]
        if prefer == AT_UB and np.isfinite(hi):
            self.status[j], self.x[j] = AT_UB, hi
        elif np.isfinite(lo):
            self.status[j], self.x[j] = AT_LB, lo
        elif np.isfinite(hi):
            self.status[j], self.x[j] = AT_UB, hi
        else:
            self.status[j], self.x[j] = FREE, 0.0

    def price(self, cost):
        """Reduced costs for ``cost`` under the current basis into the last tableau row."""
        m = self.m
        self.tab[m] = cost - cost[self.basic] @ self.tab[:m]
        self.tab[m, self.basic] = 0.0

    def basic_values(self):
        return self.x[self.basic]

    def primal_infeasibility(self):
        xb = self.x[self.basic]
        lo = self.lb[self.basic]
        hi = self.ub[self.basic]
        return np.maximum(np.maximum(lo - xb, xb - hi), 0.0)

    def refactor(self):
        """Rebuild the tableau body and basic values to shed accumulated round-off."""
        if not self.m:
            return
        B = self.orig[:, self.basic]
        try:
            body = np.linalg.solve(B, self.orig)
        except np.linalg.LinAlgError:
            return
        if not np.all(np.isfinite(body)):
            return
        nb = self.status != BASIC
        self.tab[: self.m] = body
        self.tab[: self.m, self.basic] = np.eye(self.m)
        self.x[self.basic] = np.linalg.solve(B, self.rhs - self.orig[:, nb] @ self.x[nb])

    def do_pivot(self, r, q):
        kernels.pivot(self.tab, r, q)
        leaving = self.basic[r]
        self.basic[r] = q
        self.status[q] = BASIC
        return leaving


def _primal_loop(t: _Tableau, cost, max_iter, allow=None):
    """Primal simplex from a primal feasible basis. Returns a status string."""
    m = t.m
    t.price(cost)
    degenerate = 0
    bland = False
    while True:
        if t.iterations >= max_iter:
            return ITERATION_LIMIT
        if t.iterations and t.iterations % t.refactor_every == 0:
            t.refactor()
            t.price(cost)
        d = t.tab[m]
        st = t.status
        improving = np.zeros(t.ncols)
        at_lb = (st == AT_LB) & (d < -OPT_TOL)
        at_ub = (st == AT_UB) & (d > OPT_TOL)
        free = (st == FREE) & (np.abs(d) > OPT_TOL)
        elig = (at_lb | at_ub | free) & ~t.blocked & (t.lb < t.ub)
        if allow is not None:
            elig &= allow
        if not elig.any():
            return OPTIMAL
        improving[elig] = np.abs(d[elig])
        if bland:
            q = int(np.flatnonzero(elig)[0])
        else:
            q = int(np.argmax(improving))
        direction = 1.0 if (st[q] == AT_LB or (st[q] == FREE and d[q] < 0)) else -1.0
        col = t.tab[:m, q]
        rate = -direction * col
        xb = t.x[t.basic]
        lo = t.lb[t.basic]
        hi = t.ub[t.basic]
        theta = np.inf
        r = -1
        to_upper = False
        with np.errstate(divide="ignore", invalid="ignore"):
            dec = rate < -PIV_TOL
            inc = rate > PIV_TOL
            lim = np.full(m, np.inf)
            lim[dec] = np.maximum(xb[dec] - lo[dec], 0.0) / -rate[dec]
            lim[inc] = np.maximum(hi[inc] - xb[inc], 0.0) / rate[inc]
        if m:
            best = lim.min()
            if np.isfinite(best):
                if bland:
                    ties = np.flatnonzero(lim <= best + 1e-12)
                    r = int(ties[np.argmin(t.basic[ties])])
                else:
                    # Harris: relax bounds by FEAS_TOL, then take the largest pivot below that step
                    with np.errstate(divide="ignore", invalid="ignore"):
                        relaxed = np.full(m, np.inf)
                        relaxed[dec] = (np.maximum(xb[dec] - lo[dec], 0.0) + FEAS_TOL) / -rate[dec]
                        relaxed[inc] = (np.maximum(hi[inc] - xb[inc], 0.0) + FEAS_TOL) / rate[inc]
                    cand = np.flatnonzero(lim <= relaxed.min())
                    r = int(cand[np.argmax(np.abs(col[cand]))])
                theta = lim[r]
                to_upper = bool(inc[r])
        span = t.ub[q] - t.lb[q]
        if span < theta:
            # entering variable runs into its opposite bound first
            theta = span
            t.x[t.basic] = xb - direction * theta * col
            t.status[q] = AT_UB if direction > 0 else AT_LB
            t.x[q] = t.ub[q] if direction > 0 else t.lb[q]
            t.iterations += 1
            degenerate = 0
            bland = False
            continue
        if not np.isfinite(theta):
            return UNBOUNDED
        t.x[t.basic] = xb - direction * theta * col
        t.x[q] = t.x[q] + direction * theta
        leaving = t.do_pivot(r, q)
        if to_upper:
            t.status[leaving], t.x[leaving] = AT_UB, t.ub[leaving]
        else:
            t.status[leaving], t.x[leaving] = AT_LB, t.lb[leaving]
        t.iterations += 1
        if theta <= 1e-12:
            degenerate += 1
            if degenerate > DEGENERATE_RUN:
                bland = True
        else:
            degenerate = 0
            bland = False


def _dual_loop(t: _Tableau, cost, max_iter):
    """Dual simplex from a dual feasible basis. Returns a status string."""
    m = t.m
    t.price(cost)
    stalls = 0
    while True:
        if t.iterations >= max_iter:
            return ITERATION_LIMIT
        if t.iterations and t.iterations % t.refactor_every == 0:
            t.refactor()
            t.price(cost)
        infeas = t.primal_infeasibility()
        if not m or infeas.max() <= FEAS_TOL:
            return OPTIMAL
        if stalls > DEGENERATE_RUN:
            r = int(np.flatnonzero(infeas > FEAS_TOL)[np.argmin(t.basic[infeas > FEAS_TOL])])
        else:
            r = int(np.argmax(infeas))
        leaving = t.basic[r]
        below = t.x[leaving] < t.lb[leaving]
        target = t.lb[leaving] if below else t.ub[leaving]
        row = t.tab[r]
        d = t.tab[m]
        st = t.status
        movable = (st != BASIC) & ~t.blocked & (t.lb < t.ub)
        if below:
            elig = movable & (((st == AT_LB) & (row < -PIV_TOL)) | ((st == AT_UB) & (row > PIV_TOL)) | ((st == FREE) & (np.abs(row) > PIV_TOL)))
        else:
            elig = movable & (((st == AT_LB) & (row > PIV_TOL)) | ((st == AT_UB) & (row < -PIV_TOL)) | ((st == FREE) & (np.abs(row) > PIV_TOL)))
        if not elig.any():
            return INFEASIBLE
        idx = np.flatnonzero(elig)
        ratios = np.abs(d[idx]) / np.abs(row[idx])
        best = ratios.min()
        ties = idx[ratios <= best + 1e-12]
        if stalls > DEGENERATE_RUN:
            q = int(ties.min())
        else:
            q = int(ties[np.argmax(np.abs(row[ties]))])
        step = (t.x[leaving] - target) / row[q]
        col = t.tab[:m, q].copy()
        t.x[t.basic] = t.x[t.basic] - col * step
        t.x[q] += step
        t.do_pivot(r, q)
        t.status[leaving] = AT_LB if below else AT_UB
        t.x[leaving] = target
        t.iterations += 1
        stalls = stalls + 1 if best <= 1e-12 else 0


def _cold_start(lp: LpProblem) -> _Tableau:
    t = _Tableau(lp, with_artificials=True)
    m, n = t.m, t.n
    for j in range(n + m):
        t.place_nonbasic(j)
    resid = t.b - t.full @ t.x[: n + m]
    sign = np.where(resid >= 0.0, 1.0, -1.0)
    t.tab[:m, : n + m] = sign[:, None] * t.full
    t.tab[:m, n + m :] = np.eye(m)
    t.orig = np.hstack([sign[:, None] * t.full, np.eye(m)])
    t.rhs = sign * t.b
    t.basic[:] = np.arange(n + m, n + 2 * m)
    t.status[n + m :] = BASIC
    t.x[n + m :] = np.abs(resid)
    return t


def _drop_artificials(t: _Tableau):
    m, n = t.m, t.n
    art = np.arange(n + m, n + 2 * m)
    t.ub[art] = 0.0
    t.blocked[art] = True
    for r in range(m):
        if t.basic[r] < n + m:
            continue
        row = t.tab[r, : n + m]
        cand = np.flatnonzero((np.abs(row) > 1e-7) & (t.status[: n + m] != BASIC))
        if cand.size:
            q = int(cand[np.argmax(np.abs(row[cand]))])
            leaving = t.do_pivot(r, q)
            t.status[leaving], t.x[leaving] = AT_LB, 0.0


def _warm_start(lp: LpProblem, basis: Basis) -> Optional[_Tableau]:
    t = _Tableau(lp, with_artificials=False)
    m, n = t.m, t.n
    if basis.basic.shape[0] != m or basis.status.shape[0] != n + m:
        return None
    B = t.full[:, basis.basic]
    try:
        body = np.linalg.solve(B, t.full)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(body)):
        return None
    t.tab[:m] = body
    t.basic[:] = basis.basic
    for j in range(n + m):
        if basis.status[j] == BASIC:
            continue
        t.place_nonbasic(j, prefer=int(basis.status[j]))
    in_basis = np.zeros(n + m, dtype=bool)
    in_basis[t.basic] = True
    if in_basis.sum() != m:
        return None
    t.status[t.basic] = BASIC
    nb = ~in_basis
    t.x[t.basic] = np.linalg.solve(B, t.b - t.full[:, nb] @ t.x[nb])
    return t


def _dual_feasible_placement(t: _Tableau, cost) -> bool:
    """Move boxed nonbasics to the bound matching their reduced-cost sign."""
    t.price(cost)
    d = t.tab[t.m]
    ok = True
    for j in np.flatnonzero(t.status != BASIC):
        if d[j] > OPT_TOL and t.status[j] != AT_LB:
            if np.isfinite(t.lb[j]):
                t.status[j], t.x[j] = AT_LB, t.lb[j]
            else:
                ok = False
        elif d[j] < -OPT_TOL and t.status[j] != AT_UB:
            if np.isfinite(t.ub[j]):
                t.status[j], t.x[j] = AT_UB, t.ub[j]
            else:
                ok = False
    if ok:
        nb = t.status != BASIC
        B = t.full[:, t.basic]
        t.x[t.basic] = np.linalg.solve(B, t.b - t.full[:, nb] @ t.x[nb])
    return ok


def _finish(t: _Tableau, lp: LpProblem, status: str) -> LpSolution:
    m, n = t.m, t.n
    x = t.x[:n].copy()
    if status != OPTIMAL:
        return LpSolution(status, x if status == ITERATION_LIMIT else None, iterations=t.iterations)
    # snap tiny bound drifts
    x = np.minimum(np.maximum(x, lp.lb), lp.ub)
    t.price(t.cost)
    d = t.tab[m, : n + m]
    duals = -d[n : n + m].copy()
    status_arr = t.status[: n + m].copy()
    basis = Basis(t.basic.copy(), status_arr)
    obj = float(lp.c @ x)
    return LpSolution(OPTIMAL, x, obj, basis, duals, t.iterations, d[:n].copy())


def _has_bad_bounds(lp: LpProblem) -> bool:
    return bool(np.any(lp.lb > lp.ub + FEAS_TOL))


def simplex_solve(lp: LpProblem, warm: Optional[Basis] = None, max_iter: int = 50_000) -> LpSolution:
    """Solve ``lp``; ``warm`` is a basis returned by an earlier solve of a same-shaped LP."""
    if _has_bad_bounds(lp):
        return LpSolution(INFEASIBLE)
    if warm is not None:
        t = _warm_start(lp, warm)
        if t is not None:
            infeas = t.primal_infeasibility().max() if t.m else 0.0
            if infeas <= FEAS_TOL:
                status = _primal_loop(t, t.cost, max_iter)
                return _finish(t, lp, status)
            if _dual_feasible_placement(t, t.cost):
                status = _dual_loop(t, t.cost, max_iter)
                if status == OPTIMAL:
                    # clean up any residual dual infeasibility
                    status = _primal_loop(t, t.cost, max_iter)
                if status in (OPTIMAL, INFEASIBLE):
                    return _finish(t, lp, status)
    t = _cold_start(lp)
    m, n = t.m, t.n
    phase1 = np.zeros(t.ncols)
    phase1[n + m :] = 1.0
    status = _primal_loop(t, phase1, max_iter)
    if status == ITERATION_LIMIT:
        return _finish(t, lp, status)
    scale = 1.0 + (np.abs(lp.b).max() if m else 0.0)
    if t.x[n + m :].sum() > FEAS_TOL * scale:
        return LpSolution(INFEASIBLE, iterations=t.iterations)
    _drop_artificials(t)
    status = _primal_loop(t, t.cost, max_iter)
    if status == OPTIMAL:
        sol = _finish(t, lp, status)
        # artificials still basic (redundant rows) are not part of a reusable basis
        if np.any(t.basic >= n + m):
            sol.basis = None
        return sol
    return _finish(t, lp, status)
