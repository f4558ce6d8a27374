"""Solver-agnostic mixed-integer model representation.

A :class:`ModelIR` is built by appending variables, linear rows, cone tags,
SOS1 groups and constraint hooks, then frozen with :meth:`ModelIR.finalize`.
Insertion order is preserved everywhere so exports are byte-deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from scipy import sparse

INF = math.inf
CONTINUOUS = "continuous"
BINARY = "binary"
SENSES = ("<=", ">=", "=")
CUT_TAGS = ("ordering", "star", "polymatroid", "hyperbolic-oa", "gomory", "user")


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str = CONTINUOUS
    lb: float = 0.0
    ub: float = INF

    @property
    def is_binary(self) -> bool:
        return self.kind == BINARY


@dataclass(frozen=True)
class LinRow:
    """``sum_j coefficients[j] * x_j  (sense)  rhs``."""

    coefficients: dict
    sense: str
    rhs: float
    name: str = ""

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ModelError(f"unknown row sense {self.sense!r}")
        coeffs = {}
        for j, a in self.coefficients.items():
            a = float(a)
            if not math.isfinite(a):
                raise ModelError(f"non-finite coefficient in row {self.name!r}")
            if a != 0.0:
                coeffs[int(j)] = a
        if not coeffs:
            raise ModelError(f"row {self.name!r} has no nonzero coefficient")
        if not math.isfinite(float(self.rhs)):
            raise ModelError(f"non-finite right-hand side in row {self.name!r}")
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "rhs", float(self.rhs))

    def activity(self, x) -> float:
        return float(sum(a * x[j] for j, a in self.coefficients.items()))

    def violation(self, x) -> float:
        """Positive amount by which ``x`` violates the row (0 when satisfied)."""
        lhs = self.activity(x)
        if self.sense == "<=":
            return max(lhs - self.rhs, 0.0)
        if self.sense == ">=":
            return max(self.rhs - lhs, 0.0)
        return abs(lhs - self.rhs)


@dataclass(frozen=True)
class ConeTag:
    """Second-order cone over declared variables.

    ``soc``: ``members[0] >= ||members[1:]||``.
    ``rotated-soc``: ``2 * members[0] * members[1] >= sum_i (scale * members[i])^2``
    for ``i >= 2`` with ``members[0], members[1] >= 0``.
    """

    kind: str
    members: tuple
    scale: float = 1.0
    name: str = ""

    def residual(self, x) -> float:
        """Amount by which the cone is violated at ``x`` (0 when inside)."""
        vals = [float(x[m]) for m in self.members]
        if self.kind == "soc":
            return max(math.sqrt(sum(v * v for v in vals[1:])) - vals[0], 0.0)
        a, b = max(vals[0], 0.0), max(vals[1], 0.0)
        tail = math.sqrt(sum((self.scale * v) ** 2 for v in vals[2:]))
        return max(tail - math.sqrt(2.0 * a * b), 0.0)


@dataclass(frozen=True)
class SubmodularEpigraph:
    """Hook for ``sqrt(sigma + sum_s d_s o_s) <= tau`` over binary ``o``.

    Not representable as a linear row or cone in the variables; the solver
    enforces it through extended polymatroid cuts.
    """

    o_indices: tuple
    sigma: float
    d: tuple
    tau_index: int
    name: str = ""

    def value(self, x) -> float:
        """Greedy-vertex value ``max(sqrt(sigma), pi . o)``; equals ``h(o)`` at binary ``o``.

        Between integer points this is the extension the polymatroid cuts
        enforce, so near-integral LP points are judged the way they are cut.
        """
        o = np.clip(np.array([float(x[i]) for i in self.o_indices]), 0.0, 1.0)
        order = np.argsort(-o, kind="stable")
        levels = np.sqrt(self.sigma + np.cumsum(np.asarray(self.d, dtype=float)[order]))
        pi = np.diff(levels, prepend=0.0)
        return max(math.sqrt(self.sigma), float(pi @ o[order]))

    def residual(self, x) -> float:
        return max(self.value(x) - float(x[self.tau_index]), 0.0)


@dataclass(frozen=True)
class Cut:
    row: LinRow
    tag: str
    origin: Any = None

    def __post_init__(self):
        if self.tag not in CUT_TAGS:
            raise ModelError(f"unknown cut tag {self.tag!r}")


@dataclass
class Objective:
    coefficients: dict = field(default_factory=dict)
    constant: float = 0.0
    sense: str = "min"


class ModelIR:
    """Mixed-integer linear model with cone tags and cut hooks."""

    def __init__(self, name: str = "drcc"):
        self.name = name
        self.variables: list[Variable] = []
        self.rows: list[LinRow] = []
        self.cones: list[ConeTag] = []
        self.sos1_groups: list[tuple] = []
        self.hooks: list[SubmodularEpigraph] = []
        self.objective = Objective()
        self.annotations: dict[str, str] = {}
        # structural metadata left by builders (not exported)
        self.meta: dict[str, Any] = {}
        self._var_index: dict[str, int] = {}
        self._row_names: set[str] = set()
        self._final = False

    # -- building ----------------------------------------------------------

    def _mutable(self):
        if self._final:
            raise ModelError("model is finalized")

    def add_variable(self, name: str, kind: str = CONTINUOUS, lb: float = 0.0, ub: float = INF, note: str = None) -> int:
        self._mutable()
        if name in self._var_index:
            raise ModelError(f"duplicate variable name {name!r}")
        if kind not in (CONTINUOUS, BINARY):
            raise ModelError(f"unknown variable kind {kind!r}")
        lb, ub = float(lb), float(ub)
        if kind == BINARY:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        if math.isnan(lb) or math.isnan(ub) or lb > ub:
            raise ModelError(f"malformed bounds [{lb}, {ub}] for {name!r}")
        idx = len(self.variables)
        self.variables.append(Variable(name, kind, lb, ub))
        self._var_index[name] = idx
        if note:
            self.annotations[f"var:{name}"] = note
        return idx

    def add_binary(self, name: str, note: str = None) -> int:
        return self.add_variable(name, BINARY, 0.0, 1.0, note=note)

    def add_row(self, coefficients: dict, sense: str, rhs: float, name: str = None, note: str = None) -> int:
        self._mutable()
        idx = len(self.rows)
        name = name or f"r{idx}"
        if name in self._row_names:
            raise ModelError(f"duplicate row name {name!r}")
        for j in coefficients:
            if not 0 <= j < len(self.variables):
                raise ModelError(f"row {name!r} references undeclared variable {j}")
        self.rows.append(LinRow(dict(coefficients), sense, rhs, name))
        self._row_names.add(name)
        if note:
            self.annotations[f"row:{name}"] = note
        return idx

    def add_cone(self, kind: str, members, name: str = None, scale: float = 1.0) -> int:
        self._mutable()
        members = tuple(int(m) for m in members)
        if kind not in ("soc", "rotated-soc"):
            raise ModelError(f"unknown cone kind {kind!r}")
        if len(members) < (3 if kind == "rotated-soc" else 2):
            raise ModelError("too few cone members")
        for m in members:
            if not 0 <= m < len(self.variables):
                raise ModelError(f"cone member {m} is not declared")
        heads = members[:2] if kind == "rotated-soc" else members[:1]
        for h in heads:
            if self.variables[h].lb < 0.0:
                raise ModelError(f"cone head {self.variables[h].name!r} must be nonnegative")
        idx = len(self.cones)
        self.cones.append(ConeTag(kind, members, float(scale), name or f"k{idx}"))
        return idx

    def add_sos1(self, indices, name: str = None) -> int:
        self._mutable()
        group = tuple(int(i) for i in indices)
        for i in group:
            if not 0 <= i < len(self.variables):
                raise ModelError(f"SOS1 member {i} is not declared")
        self.sos1_groups.append(group)
        return len(self.sos1_groups) - 1

    def add_hook(self, hook: SubmodularEpigraph) -> int:
        self._mutable()
        for i in (*hook.o_indices, hook.tau_index):
            if not 0 <= i < len(self.variables):
                raise ModelError(f"hook member {i} is not declared")
        self.hooks.append(hook)
        return len(self.hooks) - 1

    def set_objective(self, coefficients: dict, constant: float = 0.0, sense: str = "min"):
        self._mutable()
        if sense not in ("min", "max"):
            raise ModelError(f"unknown objective sense {sense!r}")
        coeffs = {}
        for j, a in coefficients.items():
            if not 0 <= j < len(self.variables):
                raise ModelError(f"objective references undeclared variable {j}")
            if not math.isfinite(a):
                raise ModelError("non-finite objective coefficient")
            if a != 0.0:
                coeffs[int(j)] = float(a)
        self.objective = Objective(coeffs, float(constant), sense)

    def finalize(self) -> "ModelIR":
        self._final = True
        return self

    @property
    def finalized(self) -> bool:
        return self._final

    # -- queries -----------------------------------------------------------

    def var(self, name: str) -> int:
        return self._var_index[name]

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def binary_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.is_binary]

    def objective_value(self, x) -> float:
        val = self.objective.constant + sum(a * x[j] for j, a in self.objective.coefficients.items())
        return float(val)

    def max_violation(self, x, include_cones: bool = True) -> float:
        """Largest violation over bounds, rows, SOS1 groups, cones and hooks."""
        worst = 0.0
        for j, v in enumerate(self.variables):
            worst = max(worst, v.lb - x[j], x[j] - v.ub)
            if v.is_binary:
                worst = max(worst, min(abs(x[j]), abs(1.0 - x[j])))
        for r in self.rows:
            worst = max(worst, r.violation(x))
        for g in self.sos1_groups:
            nz = sorted((abs(x[i]) for i in g), reverse=True)
            if len(nz) > 1:
                worst = max(worst, nz[1])
        if include_cones:
            for c in self.cones:
                worst = max(worst, c.residual(x))
            for h in self.hooks:
                worst = max(worst, h.residual(x))
        return float(worst)

    def to_arrays(self):
        """Dense-vector / sparse-matrix form for LP kernels.

        Returns ``(c, A, senses, rhs, lb, ub, binary_mask)`` with ``A`` in CSR
        format and the objective converted to minimization.
        """
        n = self.n_vars
        c = np.zeros(n)
        for j, a in self.objective.coefficients.items():
            c[j] = a
        if self.objective.sense == "max":
            c = -c
        data, rows, cols = [], [], []
        for i, r in enumerate(self.rows):
            for j, a in r.coefficients.items():
                rows.append(i)
                cols.append(j)
                data.append(a)
        A = sparse.csr_matrix((data, (rows, cols)), shape=(len(self.rows), n))
        senses = np.array([r.sense for r in self.rows], dtype=object)
        rhs = np.array([r.rhs for r in self.rows], dtype=float)
        lb = np.array([v.lb for v in self.variables])
        ub = np.array([v.ub for v in self.variables])
        mask = np.array([v.is_binary for v in self.variables], dtype=bool)
        return c, A, senses, rhs, lb, ub, mask

    def copy(self, name: Optional[str] = None) -> "ModelIR":
        """Unfinalized deep-enough copy (rows and variables are immutable)."""
        m = ModelIR(name or self.name)
        m.variables = list(self.variables)
        m.rows = list(self.rows)
        m.cones = list(self.cones)
        m.sos1_groups = list(self.sos1_groups)
        m.hooks = list(self.hooks)
        m.objective = Objective(dict(self.objective.coefficients), self.objective.constant, self.objective.sense)
        m.annotations = dict(self.annotations)
        m.meta = dict(self.meta)
        m._var_index = dict(self._var_index)
        m._row_names = set(self._row_names)
        return m

    def with_cuts(self, cuts, drop_cones: bool = False) -> "ModelIR":
        """Copy with cut rows appended (used to bake OA snapshots into MPS)."""
        m = self.copy()
        start = len(m.rows)
        for i, cut in enumerate(cuts):
            m.add_row(cut.row.coefficients, cut.row.sense, cut.row.rhs, name=f"cut{start + i}", note=f"cut {cut.tag}")
        if drop_cones:
            m.cones = []
        return m.finalize()

    def __repr__(self):
        return (
            f"ModelIR({self.name!r}, vars={self.n_vars}, binaries={len(self.binary_indices)}, "
            f"rows={len(self.rows)}, cones={len(self.cones)}, sos1={len(self.sos1_groups)}, hooks={len(self.hooks)})"
        )
