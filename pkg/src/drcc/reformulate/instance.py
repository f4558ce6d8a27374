"""Problem data shared by all reformulations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from ..model import BINARY, CONTINUOUS, INF, LinRow, ModelIR
from ..samples import RiskBounds, RiskCost, SampleSet, var_point


@dataclass(frozen=True)
class ChanceConstraint:
    """``P(T x >= xi) >= 1 - alpha`` for all distributions near ``samples``.

    ``t`` maps decision-variable index to its coefficient in the technology row.
    """

    t: dict
    samples: SampleSet
    cost: RiskCost = RiskCost()
    name: str = ""

    def __post_init__(self):
        t = {int(j): float(a) for j, a in self.t.items() if float(a) != 0.0}
        if not t:
            raise ValueError(f"chance constraint {self.name!r} has an empty technology row")
        object.__setattr__(self, "t", t)

    def activity(self, x) -> float:
        return float(sum(a * x[j] for j, a in self.t.items()))


@dataclass
class DrccInstance:
    """``min c.x + sum_i g_i(alpha_i)`` subject to ``x in X`` and one DRCC per constraint.

    ``X`` is given by variable bounds, binary flags and linear ``rows`` over
    the decision variables.
    """

    names: list
    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    binary: np.ndarray
    rows: list
    constraints: list
    bounds: RiskBounds
    objective_constant: float = 0.0
    name: str = "instance"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        d = len(self.names)
        self.c = np.asarray(self.c, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        self.binary = np.asarray(self.binary, dtype=bool)
        for arr, label in ((self.c, "c"), (self.lb, "lb"), (self.ub, "ub"), (self.binary, "binary")):
            if arr.shape != (d,):
                raise ValueError(f"{label} has shape {arr.shape}, expected ({d},)")
        if len(set(self.names)) != d:
            raise ValueError("decision variable names must be unique")
        if not self.constraints:
            raise ValueError("an instance needs at least one chance constraint")
        for row in self.rows:
            for j in row.coefficients:
                if not 0 <= j < d:
                    raise ValueError(f"row {row.name!r} references variable {j} outside 0..{d - 1}")
        for cc in self.constraints:
            for j in cc.t:
                if not 0 <= j < d:
                    raise ValueError(f"chance constraint {cc.name!r} references variable {j}")

    @property
    def d(self) -> int:
        return len(self.names)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def base_model(self, name: str) -> ModelIR:
        """Model with the decision variables, ``X`` rows and ``c.x`` objective terms."""
        m = ModelIR(name)
        for j, nm in enumerate(self.names):
            if self.binary[j]:
                m.add_variable(nm, BINARY, 0.0, 1.0)
            else:
                m.add_variable(nm, CONTINUOUS, float(self.lb[j]), float(self.ub[j]))
        for r in self.rows:
            m.add_row(r.coefficients, r.sense, r.rhs, name=r.name or None)
        return m

    def objective_terms(self) -> dict:
        return {j: float(a) for j, a in enumerate(self.c) if a != 0.0}

    def cost_of(self, x, alphas) -> float:
        val = float(self.c @ np.asarray(x, dtype=float)) + self.objective_constant
        return val + sum(cc.cost(a) for cc, a in zip(self.constraints, alphas))

    def x_feasible(self, x, tol: float = 1e-7) -> bool:
        x = np.asarray(x, dtype=float)
        if np.any(x < self.lb - tol) or np.any(x > self.ub + tol):
            return False
        return all(r.violation(x) <= tol * (1.0 + abs(r.rhs)) for r in self.rows)

    def activity_range(self, cc: ChanceConstraint) -> tuple[float, float]:
        """Range of ``T x`` over the LP relaxation of ``X`` (may be infinite)."""
        lo = hi = 0.0
        for j, a in cc.t.items():
            ends = (a * self.lb[j], a * self.ub[j])
            lo += min(ends)
            hi += max(ends)
        if math.isfinite(hi) and math.isfinite(lo):
            return lo, hi
        # fall back to LPs over the rows of X
        res = []
        for sgn in (1.0, -1.0):
            cvec = np.zeros(self.d)
            for j, a in cc.t.items():
                cvec[j] = sgn * a
            r = _lp_over_x(self, cvec)
            res.append(sgn * r if r is not None else -sgn * INF)
        return (lo if math.isfinite(lo) else res[0]), (hi if math.isfinite(hi) else res[1])


def _lp_over_x(inst: DrccInstance, cvec) -> Optional[float]:
    """Minimum of ``cvec.x`` over the LP relaxation of ``X``; ``None`` if unbounded/infeasible."""
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for r in inst.rows:
        a = np.zeros(inst.d)
        for j, v in r.coefficients.items():
            a[j] = v
        if r.sense == "<=":
            A_ub.append(a)
            b_ub.append(r.rhs)
        elif r.sense == ">=":
            A_ub.append(-a)
            b_ub.append(-r.rhs)
        else:
            A_eq.append(a)
            b_eq.append(r.rhs)
    res = linprog(
        cvec,
        A_ub=np.array(A_ub) if A_ub else None,
        b_ub=b_ub or None,
        A_eq=np.array(A_eq) if A_eq else None,
        b_eq=b_eq or None,
        bounds=list(zip(inst.lb, inst.ub)),
        method="highs",
    )
    return float(res.fun) if res.status == 0 else None


def top_level(inst: DrccInstance, cc: ChanceConstraint) -> float:
    """Finite stand-in ``xi^0`` for the open top of the first water-level window.

    Any value at least as large as every attainable ``T x`` keeps the window
    exact; when ``T x`` is unbounded above we fall back to the largest VaR
    any admissible tolerance can demand.
    """
    xi = cc.samples.values
    _, hi = inst.activity_range(cc)
    cands = [float(xi[0]), float(xi[0]) + 1.0]
    if math.isfinite(hi):
        cands.append(hi)
    else:
        cands.append(var_point(cc.samples, inst.bounds.alpha_min).continuous + (float(xi[0]) - float(xi[-1])) + 1.0)
    return max(cands)


def single_box_instance(samples: SampleSet, bounds: RiskBounds, cost: RiskCost, c: float = 1.0, upper: float = INF, lower: float = 0.0) -> DrccInstance:
    """One scalar decision ``x in [lower, upper]`` with ``T = 1``: the canonical toy."""
    cc = ChanceConstraint({0: 1.0}, samples, cost, "cc0")
    return DrccInstance(["x"], [c], [lower], [upper], [False], [], [cc], bounds, name="toy")


def row(coefficients: dict, sense: str, rhs: float, name: str = "") -> LinRow:
    return LinRow(coefficients, sense, rhs, name)
