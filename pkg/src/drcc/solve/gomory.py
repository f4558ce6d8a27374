"""Gomory mixed-integer cuts read off an optimal simplex tableau.

For a basic binary ``x_r`` with fractional value, write its tableau row in
terms of nonbasic distances from their active bounds,

    x_r + sum_j a_j s_j = beta,   s_j >= 0,

and take ``f0 = frac(beta)``, ``f_j = frac(a_j)``. The cut

    sum_{j int}  min(f_j / f0, (1 - f_j) / (1 - f0)) s_j
  + sum_{j cont} max(a_j / f0, -a_j / (1 - f0)) s_j  >=  1

holds for every mixed-integer point inside the bounds the tableau was built
with. Distances are mapped back to structural columns (row slacks become
``b - A x``), so cuts built at the root bounds are globally valid.
"""

from __future__ import annotations

import numpy as np

from ..model import LinRow
from .simplex import AT_LB, AT_UB, BASIC, LpProblem, LpSolution

MIN_FRAC = 0.005
MAX_DYNAMISM = 1e6
MIN_VIOLATION = 1e-6


def _frac(v):
    return v - np.floor(v)


def gmi_cuts(lp: LpProblem, sol: LpSolution, int_mask, max_cuts: int = 50) -> list[LinRow]:
    """GMI rows ``pi . x >= pi0`` for the most fractional basic integer columns of ``sol``."""
    if sol.basis is None or sol.x is None:
        return []
    A = lp.A
    m, n = A.shape
    basic = sol.basis.basic
    status = sol.basis.status
    if basic.shape[0] != m or np.any(basic >= n + m):
        return []
    full = np.hstack([A, np.eye(m)])
    slack_lb = np.where(lp.senses == ">=", -np.inf, 0.0)
    slack_ub = np.where(lp.senses == "<=", np.inf, 0.0)
    lo = np.concatenate([lp.lb, slack_lb])
    hi = np.concatenate([lp.ub, slack_ub])
    is_int = np.concatenate([np.asarray(int_mask, dtype=bool), np.zeros(m, dtype=bool)])
    fin = np.isfinite(lo)
    is_int &= fin & (np.abs(np.where(fin, lo, 0.0) - np.round(np.where(fin, lo, 0.0))) < 1e-9)

    rows = np.flatnonzero(basic < n)
    cand = [(r, float(sol.x[basic[r]])) for r in rows if is_int[basic[r]]]
    scored = []
    for r, v in cand:
        f = _frac(v)
        if MIN_FRAC < f < 1.0 - MIN_FRAC:
            scored.append((-min(f, 1.0 - f), int(basic[r]), r))
    if not scored:
        return []
    scored.sort()
    pick = [r for _, _, r in scored[:max_cuts]]
    B = full[:, basic]
    try:
        rows_inv = np.linalg.solve(B.T, np.eye(m)[:, pick]).T
    except np.linalg.LinAlgError:
        return []
    tab = rows_inv @ full
    nonbasic = status != BASIC
    at_ub = status == AT_UB
    fixed = np.isfinite(lo) & np.isfinite(hi) & (hi - lo <= 1e-12)
    usable = nonbasic & ~fixed
    if np.any(nonbasic & ~fixed & (status != AT_LB) & (status != AT_UB)):
        return []  # free nonbasic columns break the distance form

    out = []
    for k, r in enumerate(pick):
        beta = float(sol.x[basic[r]])
        f0 = _frac(beta)
        a = np.where(at_ub, -tab[k], tab[k])
        a[~usable] = 0.0
        g = np.zeros(n + m)
        icol = usable & is_int
        fj = _frac(a[icol])
        g[icol] = np.minimum(fj / f0, (1.0 - fj) / (1.0 - f0))
        ccol = usable & ~is_int
        g[ccol] = np.maximum(a[ccol] / f0, -a[ccol] / (1.0 - f0))
        g[np.abs(g) < 1e-11] = 0.0
        # back to structurals: s_j = x_j - lo_j (at lb) or hi_j - x_j (at ub)
        pi = np.zeros(n)
        pi0 = 1.0
        s = g[:n]
        lbs = ~at_ub[:n]
        pi[lbs] += s[lbs]
        pi0 += float(s[lbs] @ np.where(s[lbs] != 0.0, lp.lb[lbs], 0.0))
        ubs = at_ub[:n]
        pi[ubs] -= s[ubs]
        pi0 -= float(s[ubs] @ np.where(s[ubs] != 0.0, lp.ub[ubs], 0.0))
        # slack distance: "<=" rows at 0 give b - A x; ">=" rows at 0 give A x - b
        gs = g[n:]
        nz = np.flatnonzero(gs)
        for i in nz:
            if lp.senses[i] == "<=":
                pi -= gs[i] * A[i]
                pi0 -= gs[i] * lp.b[i]
            else:
                pi += gs[i] * A[i]
                pi0 += gs[i] * lp.b[i]
        big = np.abs(pi).max() if n else 0.0
        if big <= 0.0 or not np.isfinite(big) or not np.isfinite(pi0):
            continue
        # drop negligible terms, paying their largest possible value in the rhs
        tiny = np.flatnonzero((pi != 0.0) & (np.abs(pi) < 1e-9 * big))
        worst = np.maximum(pi[tiny] * lp.lb[tiny], pi[tiny] * lp.ub[tiny])
        keep = ~np.isfinite(worst)
        pi0 -= float(worst[~keep].sum())
        pi[tiny[~keep]] = 0.0
        live = np.abs(pi[pi != 0.0])
        if live.size == 0 or live.max() / live.min() > MAX_DYNAMISM:
            continue
        scale = 1.0 / big
        pi *= scale
        pi0 *= scale
        # a hair of slack against round-off in the tableau
        pi0 -= 1e-9 * max(1.0, abs(pi0))
        if pi0 - float(pi @ sol.x) < MIN_VIOLATION:
            continue
        out.append(LinRow({int(j): float(pi[j]) for j in np.flatnonzero(pi)}, ">=", float(pi0)))
    return out
