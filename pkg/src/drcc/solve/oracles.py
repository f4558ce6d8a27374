"""Brute-force ground truth for the reformulations.

None of these routines touch the model builders or the branch-and-cut
engine: they work on the instance directly and lean on HiGHS (through
scipy) for the inner LP/MILP over ``X``.
"""

from __future__ import annotations

import itertools
import math
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from ..reformulate.cuts import submodular_coeffs, window_pairs
from ..reformulate.instance import DrccInstance
from ..samples import SampleSet, build_var_curve

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
JK_CAP = 60
ENUM_CAP = 100_000
GRID_CAP = 1_000_000


class OracleInfeasible(ValueError):
    """No candidate admits a feasible decision."""


class OracleCapError(ValueError):
    """The instance is too large for exhaustive enumeration."""


class FiniteOracle(NamedTuple):
    objective: float
    levels: tuple
    alphas: tuple
    x: np.ndarray


class JkOracle(NamedTuple):
    objective: float
    alpha: float
    x: np.ndarray
    pair: tuple


class GridOracle(NamedTuple):
    upper: float
    lower: float
    alphas: tuple
    x: np.ndarray

    @property
    def width(self) -> float:
        return self.upper - self.lower


# ---------------------------------------------------------------------------
# inner problem over X
# ---------------------------------------------------------------------------


class _XSolver:
    """``min c.x`` over ``X`` with extra bounds ``lo_i <= T_i x <= hi_i``."""

    def __init__(self, inst: DrccInstance):
        self.inst = inst
        d = inst.d
        self.T = np.zeros((inst.n_constraints, d))
        for i, cc in enumerate(inst.constraints):
            for j, a in cc.t.items():
                self.T[i, j] = a
        rows = np.zeros((len(inst.rows), d))
        lo = np.full(len(inst.rows), -np.inf)
        hi = np.full(len(inst.rows), np.inf)
        for r, row in enumerate(inst.rows):
            for j, a in row.coefficients.items():
                rows[r, j] = a
            if row.sense in ("<=", "="):
                hi[r] = row.rhs
            if row.sense in (">=", "="):
                lo[r] = row.rhs
        self.rows, self.row_lo, self.row_hi = rows, lo, hi
        self.has_int = bool(inst.binary.any())
        self.box = not inst.rows and not self.has_int and inst.n_constraints == 1
        lb = np.where(inst.binary, 0.0, inst.lb)
        ub = np.where(inst.binary, 1.0, inst.ub)
        self.lb, self.ub = lb, ub
        self.calls = 0

    def solve(self, lo, hi) -> tuple[float, Optional[np.ndarray]]:
        """Optimal value (``inf`` if infeasible) and a minimizer."""
        self.calls += 1
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if np.any(lo > hi + 1e-12):
            return math.inf, None
        if self.box:
            return self._knapsack(float(lo[0]), float(hi[0]))
        A = np.vstack([self.rows, self.T])
        L = np.concatenate([self.row_lo, lo])
        U = np.concatenate([self.row_hi, hi])
        if self.has_int:
            res = milp(
                self.inst.c,
                constraints=LinearConstraint(A, L, U),
                integrality=self.inst.binary.astype(int),
                bounds=Bounds(self.lb, self.ub),
                options={"mip_rel_gap": 1e-9},
            )
            if res.status != 0 or res.x is None:
                return math.inf, None
            return float(res.fun), res.x
        A_ub, b_ub, A_eq, b_eq = [], [], [], []
        for a, l_, u_ in zip(A, L, U):
            if l_ == u_:
                A_eq.append(a)
                b_eq.append(l_)
                continue
            if math.isfinite(u_):
                A_ub.append(a)
                b_ub.append(u_)
            if math.isfinite(l_):
                A_ub.append(-a)
                b_ub.append(-l_)
        res = linprog(
            self.inst.c,
            A_ub=np.array(A_ub) if A_ub else None,
            b_ub=b_ub or None,
            A_eq=np.array(A_eq) if A_eq else None,
            b_eq=b_eq or None,
            bounds=np.column_stack([self.lb, self.ub]),
            method="highs",
        )
        if res.status == 3:
            return -math.inf, None
        if res.status != 0:
            return math.inf, None
        return float(res.fun), res.x

    def _knapsack(self, lo, hi):
        """Continuous knapsack: box ``X`` and a single two-sided row on ``T x``."""
        c, t = self.inst.c, self.T[0]
        lb, ub = self.lb, self.ub
        idle = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
        x = np.where(c > 0, lb, np.where(c < 0, ub, idle))
        if not np.all(np.isfinite(x)):
            return -math.inf, None
        s = float(t @ x)
        if s < lo:
            x = self._move(x, lo - s, +1.0)
        elif s > hi:
            x = self._move(x, s - hi, -1.0)
        if x is None:
            return math.inf, None
        return float(c @ x), x

    def _move(self, x, need, direction):
        c, t = self.inst.c, self.T[0]
        rates, caps = [], []
        for j in range(len(x)):
            if t[j] == 0.0:
                rates.append(math.inf)
                caps.append(0.0)
                continue
            step = direction / t[j]  # change of x_j per unit change of T x
            room = (self.ub[j] - x[j]) if step > 0 else (x[j] - self.lb[j])
            rates.append(c[j] * step)
            caps.append(room / abs(step) if room > 0 else 0.0)
        x = x.copy()
        for j in sorted(range(len(x)), key=lambda j: (rates[j], j)):
            if need <= 0.0:
                break
            if caps[j] <= 0.0:
                continue
            take = min(need, caps[j])
            x[j] += take * direction / t[j]
            need -= take
        if need > 1e-12 * (1.0 + abs(need)):
            return None
        return x


# ---------------------------------------------------------------------------
# finite-support model
# ---------------------------------------------------------------------------


def oracle_finite_enum(inst: DrccInstance, curves=None, cap: int = ENUM_CAP) -> FiniteOracle:
    """Enumerate the enforced level of every constraint jointly; one LP each."""
    if curves is None:
        curves = [build_var_curve(cc.samples, inst.bounds) for cc in inst.constraints]
    sizes = [c.n_prime for c in curves]
    if math.prod(sizes) > cap:
        digits = sum(math.log10(s) for s in sizes)
        raise OracleCapError(f"about 10^{digits:.1f} level combinations exceed the cap of {cap}")
    xs = _XSolver(inst)
    best = (math.inf, None, None)
    inf_hi = np.full(inst.n_constraints, np.inf)
    for combo in itertools.product(*[range(s) for s in sizes]):
        lo = np.array([float(curves[i].levels[n]) for i, n in enumerate(combo)])
        val, x = xs.solve(lo, inf_hi)
        if not math.isfinite(val):
            continue
        risk = sum(cc.cost(float(curves[i].sample_alphas[n])) for i, (cc, n) in enumerate(zip(inst.constraints, combo)))
        total = val + risk + inst.objective_constant
        if total < best[0]:
            best = (total, combo, x)
    if best[1] is None:
        raise OracleInfeasible("every level combination is infeasible")
    combo = best[1]
    return FiniteOracle(
        best[0],
        tuple(n + 1 for n in combo),
        tuple(float(curves[i].sample_alphas[n]) for i, n in enumerate(combo)),
        best[2],
    )


# ---------------------------------------------------------------------------
# continuous model, single constraint
# ---------------------------------------------------------------------------


def _golden(f, a, b, tol):
    """Minimize a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))`` with endpoints checked."""
    fa, fb = f(a), f(b)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd and not (math.isinf(fc) and math.isinf(fd)):
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    cands = [(fa, a), (fb, b), (fc, c), (fd, d)]
    fbest, xbest = min(cands, key=lambda p: (p[0], p[1]))
    return xbest, fbest


def oracle_jk_enum(inst: DrccInstance, cap: int = JK_CAP, tol: float = 1e-9) -> JkOracle:
    """Exact continuous-ball optimum by enumerating window pairs ``(j, k)``.

    For a pair, ``alpha`` ranges over ``[k/N, (k+1)/N]`` clipped to the
    admissible window and ``T x`` over ``[xi^{j+1}, xi^j]``; the requirement
    ``T x >= xi^{k+1} + (N eps + d_jk) / (alpha N - j)`` makes the best
    objective convex in ``alpha`` for a linear risk cost, so a golden-section
    search over ``alpha`` with an inner LP is exact up to ``tol``.
    """
    if inst.n_constraints != 1:
        raise ValueError("the pair oracle handles a single chance constraint")
    cc = inst.constraints[0]
    s = cc.samples
    n = s.n
    if n > cap:
        raise OracleCapError(f"N = {n} exceeds the pair-oracle cap of {cap}")
    xi = s.values
    a_lo, a_hi = inst.bounds.alpha_min, inst.bounds.alpha_bar
    xs = _XSolver(inst)
    _, t_max = inst.activity_range(cc)
    pairs = window_pairs(n)
    coeffs = submodular_coeffs(s, pairs)
    need = n * s.epsilon
    best = (math.inf, None, None, None)
    for (j, k), d in zip(pairs, coeffs.d):
        lo = max(k / n, a_lo)
        hi = min((k + 1) / n, a_hi)
        if lo > hi:
            continue
        top = math.inf if j == 0 else float(xi[j - 1])
        floor_ = float(xi[j])
        base = float(xi[k])
        cap_t = min(top, t_max)
        if cap_t <= base:
            continue
        # smallest alpha whose requirement fits under cap_t
        a_feas = (j + (need + d) / (cap_t - base)) / n
        lo = max(lo, a_feas)
        if lo > hi:
            continue

        def f(alpha, j=j, d=d, base=base, top=top, floor_=floor_):
            if alpha * n - j <= 0.0:
                return math.inf
            req = max(floor_, base + (need + d) / (alpha * n - j))
            val, _ = xs.solve([req], [top])
            return val + cc.cost(alpha)

        alpha, val = _golden(f, lo, hi, tol)
        if val < best[0]:
            best = (val, alpha, (j, k), d)
    if best[1] is None:
        raise OracleInfeasible("no window pair admits a feasible decision")
    val, alpha, (j, k), d = best
    req = max(float(xi[j]), float(xi[k]) + (need + d) / (alpha * n - j))
    _, x = xs.solve([req], [math.inf if j == 0 else float(xi[j - 1])])
    return JkOracle(val + inst.objective_constant, float(alpha), x, (j, k))


# ---------------------------------------------------------------------------
# dense tolerance grid, any number of constraints
# ---------------------------------------------------------------------------


def oracle_grid(inst: DrccInstance, resolution: int = 50, cap: int = GRID_CAP) -> GridOracle:
    """Bracket the continuous-ball optimum on a tolerance grid.

    Grid points give feasible solutions (upper bound). On a grid cell the
    risk cost is at least its value at the lower corner and the VaR at
    least its value at the upper corner, so pairing the two gives a valid
    lower bound for the cell.
    """
    from ..samples import var_many

    m = inst.n_constraints
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    if resolution**m > cap:
        raise OracleCapError(f"{resolution}^{m} grid points exceed the cap of {cap}")
    grid = np.linspace(inst.bounds.alpha_min, inst.bounds.alpha_bar, resolution)
    tvals = [var_many(cc.samples, grid)[0] for cc in inst.constraints]
    costs = [np.array([cc.cost(a) for a in grid]) for cc in inst.constraints]
    xs = _XSolver(inst)
    inf_hi = np.full(m, np.inf)
    lp = np.empty((resolution,) * m)
    sols = {}
    for idx in itertools.product(range(resolution), repeat=m):
        lo = np.array([tvals[i][g] for i, g in enumerate(idx)])
        val, x = xs.solve(lo, inf_hi)
        lp[idx] = val
        sols[idx] = x
    risk = np.zeros((resolution,) * m)
    for i in range(m):
        shape = [1] * m
        shape[i] = resolution
        risk = risk + costs[i].reshape(shape)
    total = lp + risk + inst.objective_constant
    if not np.isfinite(total).any():
        raise OracleInfeasible("no grid point admits a feasible decision")
    flat = int(np.argmin(total))
    best_idx = np.unravel_index(flat, total.shape)
    upper = float(total[best_idx])
    # cell lower bounds: risk at the lower corner, LP at the upper corner
    cells = tuple(slice(0, resolution - 1) for _ in range(m))
    shifted = tuple(slice(1, resolution) for _ in range(m))
    lower_cells = lp[shifted] + risk[cells] + inst.objective_constant
    lower = float(np.min(lower_cells)) if lower_cells.size else upper
    lower = min(lower, upper)
    return GridOracle(upper, lower, tuple(float(grid[g]) for g in best_idx), sols[tuple(best_idx)])


# ---------------------------------------------------------------------------
# worst-case VaR by direct search
# ---------------------------------------------------------------------------


def flooded_amount(values, v: float, alpha: float) -> float:
    """Direct loop over the sorted samples (independent of the kernels)."""
    xi = sorted((float(a) for a in values), reverse=True)
    n = len(xi)
    width = alpha * n
    total = 0.0
    i = 0
    while width > 1e-12 and i < n:
        w = min(1.0, width)
        total += w * max(v - xi[i], 0.0)
        width -= w
        i += 1
    return total / n


def var_bisection_oracle(samples: SampleSet, alpha: float, tol: float = 1e-12) -> float:
    """Smallest level ``v`` whose flood over width ``alpha`` holds ``epsilon`` water."""
    lo = float(samples.values[-1])
    hi = float(samples.values[0]) + samples.epsilon / alpha + 1.0
    while hi - lo > tol * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if flooded_amount(samples.values, mid, alpha) >= samples.epsilon:
            hi = mid
        else:
            lo = mid
    return hi
