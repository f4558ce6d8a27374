"""LP relaxations of a :class:`ModelIR` with a growing global cut pool.

Two backends share one interface: the in-house dense simplex
(``"simplex"``, warm-startable) and HiGHS through :func:`scipy.optimize.linprog`
(``"highs"``). Node subproblems differ from the root only in variable bounds,
and every cut is globally valid, so one relaxation object serves a whole
search tree. Row additions swap in fresh arrays, so a solve that grabbed a
snapshot is never disturbed by a concurrent append.
"""

from __future__ import annotations

import threading
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from ..model import LinRow, ModelIR
from .simplex import (
    BASIC,
    INFEASIBLE,
    ITERATION_LIMIT,
    OPTIMAL,
    UNBOUNDED,
    Basis,
    LpProblem,
    LpSolution,
    simplex_solve,
)

BACKENDS = ("highs", "simplex")
DEFAULT_BACKEND = "highs"

_HIGHS_STATUS = {0: OPTIMAL, 1: ITERATION_LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}


def _row_arrays(rows, n):
    data, ri, ci = [], [], []
    for i, r in enumerate(rows):
        for j, a in r.coefficients.items():
            ri.append(i)
            ci.append(j)
            data.append(a)
    A = sparse.csr_matrix((data, (ri, ci)), shape=(len(rows), n))
    senses = np.array([r.sense for r in rows], dtype=object)
    rhs = np.array([r.rhs for r in rows], dtype=float)
    return A, senses, rhs


class LpRelaxation:
    """Continuous relaxation of ``model`` (integrality, cones and hooks dropped)."""

    def __init__(self, model: ModelIR, backend: str = DEFAULT_BACKEND):
        if backend not in BACKENDS:
            raise ValueError(f"unknown LP backend {backend!r}; choose from {BACKENDS}")
        self.backend = backend
        c, A, senses, rhs, lb, ub, mask = model.to_arrays()
        self.sign = -1.0 if model.objective.sense == "max" else 1.0
        self.constant = model.objective.constant
        self.c = c
        self.lb = lb
        self.ub = ub
        self.binary_mask = mask
        self.n = c.shape[0]
        self._lock = threading.Lock()
        self._snap = (A, senses, rhs)
        self._dense = None
        self._highs = None
        self.n_base_rows = A.shape[0]

    @property
    def n_rows(self) -> int:
        return self._snap[0].shape[0]

    def add_rows(self, rows: list[LinRow]):
        if not rows:
            return
        with self._lock:
            A, senses, rhs = self._snap
            A2, s2, r2 = _row_arrays(rows, self.n)
            self._snap = (sparse.vstack([A, A2], format="csr"), np.concatenate([senses, s2]), np.concatenate([rhs, r2]))
            self._dense = None
            self._highs = None

    # -- backends ----------------------------------------------------------

    def _highs_arrays(self):
        with self._lock:
            if self._highs is None:
                A, senses, rhs = self._snap
                le = senses == "<="
                ge = senses == ">="
                eq = senses == "="
                ub_rows = sparse.vstack([A[np.flatnonzero(le)], -A[np.flatnonzero(ge)]], format="csr")
                ub_rhs = np.concatenate([rhs[le], -rhs[ge]])
                eq_rows = A[np.flatnonzero(eq)]
                self._highs = (ub_rows, ub_rhs, eq_rows, rhs[eq])
            return self._highs

    def _dense_arrays(self):
        with self._lock:
            if self._dense is None:
                A, senses, rhs = self._snap
                self._dense = (A.toarray(), senses, rhs)
            return self._dense

    def dense_problem(self, lb=None, ub=None) -> LpProblem:
        """Current relaxation as a dense :class:`LpProblem` in minimization form."""
        A, senses, rhs = self._dense_arrays()
        return LpProblem(self.c, A, senses, rhs, self.lb if lb is None else lb, self.ub if ub is None else ub)

    def solve(self, lb=None, ub=None, warm: Optional[Basis] = None) -> LpSolution:
        """Solve with the given bounds; objective includes the model constant and sense."""
        lb = self.lb if lb is None else lb
        ub = self.ub if ub is None else ub
        if np.any(lb > ub + 1e-9):
            return LpSolution(INFEASIBLE)
        if self.backend == "highs":
            sol = self._solve_highs(lb, ub)
        else:
            sol = self._solve_simplex(lb, ub, warm)
        if sol.status == OPTIMAL:
            sol.objective = self.sign * float(self.c @ sol.x) + self.constant
        return sol

    def _solve_highs(self, lb, ub) -> LpSolution:
        A_ub, b_ub, A_eq, b_eq = self._highs_arrays()
        res = linprog(
            self.c,
            A_ub=A_ub if A_ub.shape[0] else None,
            b_ub=b_ub if A_ub.shape[0] else None,
            A_eq=A_eq if A_eq.shape[0] else None,
            b_eq=b_eq if A_eq.shape[0] else None,
            bounds=np.column_stack([lb, ub]),
            method="highs",
            # node LPs are small and re-solved many times; presolve costs more than it saves
            options={"presolve": False},
        )
        status = _HIGHS_STATUS.get(res.status, ITERATION_LIMIT)
        if status != OPTIMAL:
            return LpSolution(status)
        x = np.minimum(np.maximum(res.x, lb), ub)
        return LpSolution(OPTIMAL, x, iterations=int(getattr(res, "nit", 0)))

    def _solve_simplex(self, lb, ub, warm) -> LpSolution:
        lp = self.dense_problem(lb, ub)
        if warm is not None:
            warm = extend_basis(warm, self.n, lp.A.shape[0])
        return simplex_solve(lp, warm=warm)


def extend_basis(basis: Basis, n: int, m: int) -> Optional[Basis]:
    """Grow a basis to ``m`` rows by making the new rows' slacks basic."""
    m_old = basis.basic.shape[0]
    if m_old == m:
        return basis
    if m_old > m:
        return None
    extra = np.arange(n + m_old, n + m)
    status = np.concatenate([basis.status, np.full(m - m_old, BASIC, dtype=basis.status.dtype)])
    return Basis(np.concatenate([basis.basic, extra]), status)


def solve_lp(model: ModelIR, backend: str = DEFAULT_BACKEND) -> LpSolution:
    """One-shot relaxation solve."""
    return LpRelaxation(model, backend).solve()
