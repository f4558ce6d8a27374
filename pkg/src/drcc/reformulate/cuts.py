"""Valid inequalities and their separation routines.

* ordering and strengthened star inequalities for the level-indicator
  binaries of the finite model (mixing-set structure);
* extended polymatroid inequalities for ``tau >= sqrt(sigma + d.o)`` over
  binary ``o``, separated by the greedy vertex of the submodular function;
* tangent (outer-approximation) cuts for second-order cones, in particular
  the hyperbolic constraint ``tau^2 <= u w``.

The ``*Separator`` classes wrap these as branch-and-cut generators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import kernels
from ..model import ConeTag, Cut, LinRow, ModelIR
from ..samples import SampleSet, VarCurve

CUT_TOL = 1e-7
# separators must fire on anything the solver's 1e-6 acceptance test rejects
ACCEPT_SLACK = 5e-7


# ---------------------------------------------------------------------------
# mixing-set cuts
# ---------------------------------------------------------------------------


def ordering_rows(y_indices) -> list[Cut]:
    y = list(y_indices)
    return [Cut(LinRow({y[n + 1]: 1.0, y[n]: -1.0}, ">=", 0.0, f"ord{n + 1}"), "ordering", n + 1) for n in range(len(y) - 1)]


def star_row(levels, t_row: dict, y_indices) -> Cut:
    y = list(y_indices)
    if len(y) != len(levels) - 1:
        raise ValueError(f"expected {len(levels) - 1} level binaries, got {len(y)}")
    coeffs = dict(t_row)
    for n, yi in enumerate(y):
        coeffs[yi] = coeffs.get(yi, 0.0) - float(levels[n] - levels[n + 1])
    return Cut(LinRow(coeffs, ">=", float(levels[-1]), "star"), "star", None)


def ordering_cuts(curve: VarCurve, y_indices) -> list[Cut]:
    """``y_{n+1} >= y_n`` for ``n = 1 .. N'-2``."""
    y = list(y_indices)
    if len(y) != curve.n_prime - 1:
        raise ValueError(f"expected {curve.n_prime - 1} level binaries, got {len(y)}")
    return ordering_rows(y)


def star_cut(curve: VarCurve, t_row: dict, y_indices) -> Cut:
    """``T x >= xi^{N'} + sum_n (xi^n - xi^{n+1}) y_n``."""
    return star_row(curve.levels, t_row, y_indices)


# ---------------------------------------------------------------------------
# submodular epigraph
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubmodularCoeffs:
    """``h(S) = sqrt(sigma + sum_{s in S} d_s)`` over window pairs ``(j, k)``."""

    sigma: float
    d: np.ndarray
    pairs: tuple

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if not self.sigma > 0.0:
            raise ValueError("sigma must be positive")
        if np.any(d < 0.0):
            raise ValueError("d must be nonnegative")
        object.__setattr__(self, "d", d)

    @property
    def size(self) -> int:
        return int(self.d.shape[0])

    def h(self, subset) -> float:
        idx = list(subset)
        return math.sqrt(self.sigma + float(self.d[idx].sum()) if idx else self.sigma)


def window_pairs(n: int, k_max: Optional[int] = None) -> list[tuple[int, int]]:
    """All ``(j, k)`` with ``0 <= j <= k <= N-1`` (optionally ``k <= k_max``), ``j`` outer."""
    top = n - 1 if k_max is None else min(n - 1, k_max)
    return [(j, k) for j in range(n) for k in range(j, top + 1)]


def submodular_coeffs(samples: SampleSet, pairs=None) -> SubmodularCoeffs:
    """``sigma = N eps`` and ``d_jk = sum_{i=j+1}^{k} (xi^i - xi^{k+1})``."""
    xi = samples.values
    n = samples.n
    pairs = tuple(window_pairs(n) if pairs is None else pairs)
    csum = np.concatenate([[0.0], np.cumsum(xi)])  # csum[i] = xi^1 + ... + xi^i
    d = np.empty(len(pairs))
    for s, (j, k) in enumerate(pairs):
        # xi^{k+1} is xi[k] with 0-based storage
        d[s] = (csum[k] - csum[j]) - (k - j) * xi[k]
    d = np.maximum(d, 0.0)
    return SubmodularCoeffs(n * samples.epsilon, d, pairs)


@dataclass(frozen=True)
class PolymatroidCut:
    """``pi . o <= tau``."""

    pi: np.ndarray

    def lhs(self, o) -> float:
        return float(self.pi @ np.asarray(o, dtype=float))

    def to_cut(self, o_indices, tau_index: int, origin=None) -> Cut:
        coeffs = {int(i): float(p) for i, p in zip(o_indices, self.pi) if p != 0.0}
        coeffs[int(tau_index)] = coeffs.get(int(tau_index), 0.0) - 1.0
        return Cut(LinRow(coeffs, "<=", 0.0, "poly"), "polymatroid", origin)


def greedy_vertex(coeffs: SubmodularCoeffs, o_hat) -> np.ndarray:
    """Greedy extended-polymatroid vertex for the ordering of ``o_hat``.

    Entries are visited by non-increasing value, ties by ascending index.
    """
    o_hat = np.asarray(o_hat, dtype=float)
    order = np.argsort(-o_hat, kind="stable").astype(np.int64)
    pi = np.empty(coeffs.size)
    kernels.greedy_pi(float(coeffs.sigma), coeffs.d, order, pi)
    return pi


def separate_polymatroid(coeffs: SubmodularCoeffs, o_hat, tau_hat: float, tol: float = 0.0) -> Optional[PolymatroidCut]:
    """Greedy cut ``pi . o <= tau``; ``None`` unless ``pi . o_hat > tau_hat + tol``."""
    o_hat = np.asarray(o_hat, dtype=float)
    if o_hat.shape != (coeffs.size,):
        raise ValueError(f"point has {o_hat.shape} entries, expected {coeffs.size}")
    pi = greedy_vertex(coeffs, o_hat)
    if float(pi @ o_hat) > tau_hat + tol:
        return PolymatroidCut(pi)
    return None


# ---------------------------------------------------------------------------
# cone outer approximation
# ---------------------------------------------------------------------------


def hyperbolic_oa_cut(u0: float, w0: float, u_index: int = 0, w_index: int = 1, tau_index: int = 2) -> Cut:
    """Tangent cut ``tau <= (a u + w / a) / 2`` of ``tau <= sqrt(u w)`` at ``(u0, w0)``."""
    if not (u0 > 0.0 and w0 > 0.0):
        raise ValueError("generating point must have u0 > 0 and w0 > 0")
    a = math.sqrt(w0 / u0)
    return _hyperbolic_row(a, u_index, w_index, tau_index, (u0, w0))


def _hyperbolic_row(a, u_index, w_index, tau_index, origin, scale=1.0):
    coeffs = {tau_index: scale, u_index: -0.5 * a, w_index: -0.5 / a}
    return Cut(LinRow(coeffs, "<=", 0.0, "oa"), "hyperbolic-oa", origin)


def cone_oa_cut(cone: ConeTag, x) -> Optional[Cut]:
    """Supporting cut of ``cone`` that separates ``x`` (``None`` if not needed)."""
    vals = np.array([float(x[m]) for m in cone.members])
    if cone.kind == "soc":
        tail = vals[1:]
        norm = float(np.linalg.norm(tail))
        if norm <= 0.0:
            return None
        coeffs = {cone.members[0]: -1.0}
        for m, v in zip(cone.members[1:], tail):
            coeffs[m] = coeffs.get(m, 0.0) + v / norm
        return Cut(LinRow(coeffs, "<=", 0.0, "oa"), "hyperbolic-oa", tuple(vals))
    # rotated: s * ||t|| <= sqrt(2 a b); tangent of sqrt(2 a b) at (a0, b0) is (k a + b / k) / sqrt(2)
    u0, w0 = max(vals[0], 0.0), max(vals[1], 0.0)
    tail = vals[2:]
    norm = float(np.linalg.norm(tail))
    if norm <= 0.0:
        return None
    s = cone.scale
    target = s * norm
    if u0 > 0.0 and w0 > 0.0:
        k = math.sqrt(w0 / u0)
    elif u0 > 0.0:
        # w0 = 0: pick k so the tangent reads target / 2 at the point
        k = target / (math.sqrt(2.0) * u0)
    elif w0 > 0.0:
        k = math.sqrt(2.0) * w0 / target
    else:
        k = 1.0
    coeffs = {cone.members[0]: -k / math.sqrt(2.0), cone.members[1]: -1.0 / (k * math.sqrt(2.0))}
    for m, v in zip(cone.members[2:], tail):
        coeffs[m] = coeffs.get(m, 0.0) + s * v / norm
    return Cut(LinRow(coeffs, "<=", 0.0, "oa"), "hyperbolic-oa", tuple(vals))


# ---------------------------------------------------------------------------
# generators for the branch-and-cut engine
# ---------------------------------------------------------------------------


class CutGenerator:
    """Separation hook.

    ``separate(x, integer)`` returns cuts violated at ``x``. Generators with
    ``lazy = True`` carry constraints that the linear rows do not, so the
    engine must call them on every integer candidate; ``at_fractional``
    controls whether they also run on fractional LP points.
    """

    tag = "user"
    lazy = False
    at_fractional = True

    def separate(self, x, integer: bool) -> list[Cut]:
        raise NotImplementedError

    def seed(self) -> list[Cut]:
        return []


class PolymatroidSeparator(CutGenerator):
    """Extended polymatroid cuts for every submodular hook of a model.

    ``mode="lazy"`` separates at every node, ``mode="integer"`` only at
    integer candidates.
    """

    tag = "polymatroid"
    lazy = True

    def __init__(self, model: ModelIR, mode: str = "lazy", tol: float = CUT_TOL):
        if mode not in ("lazy", "integer"):
            raise ValueError(f"unknown polymatroid mode {mode!r}")
        self.at_fractional = mode == "lazy"
        self.tol = tol
        self.hooks = []
        for hook in model.hooks:
            coeffs = SubmodularCoeffs(hook.sigma, np.asarray(hook.d, dtype=float), tuple(range(len(hook.d))))
            self.hooks.append((hook, coeffs, np.asarray(hook.o_indices, dtype=np.int64)))

    def separate(self, x, integer: bool) -> list[Cut]:
        out = []
        for hook, coeffs, oidx in self.hooks:
            o_hat = np.clip(x[oidx], 0.0, 1.0)
            tau_hat = float(x[hook.tau_index])
            cut = separate_polymatroid(coeffs, o_hat, tau_hat, min(self.tol * (1.0 + abs(tau_hat)), ACCEPT_SLACK))
            if cut is not None:
                out.append(cut.to_cut(oidx, hook.tau_index, hook.name))
        return out


class ConeOASeparator(CutGenerator):
    """Tangent cuts for the model's cones, plus a small seed fan at the root."""

    tag = "hyperbolic-oa"
    lazy = True

    def __init__(self, model: ModelIR, mode: str = "lazy", tol: float = 1e-7, seeds: int = 7):
        if mode not in ("lazy", "integer"):
            raise ValueError(f"unknown OA mode {mode!r}")
        self.at_fractional = mode == "lazy"
        self.tol = tol
        self.cones = list(model.cones)
        self.n_seeds = seeds
        self._ub = [v.ub for v in model.variables]
        self._lb = [v.lb for v in model.variables]

    def separate(self, x, integer: bool) -> list[Cut]:
        out = []
        for cone in self.cones:
            if cone.residual(x) > self.tol:
                cut = cone_oa_cut(cone, x)
                if cut is not None:
                    out.append(cut)
        return out

    def seed(self) -> list[Cut]:
        """Tangents at a geometric fan of slopes for rotated cones with one nonnegative tail."""
        out = []
        for cone in self.cones:
            if cone.kind != "rotated-soc" or len(cone.members) != 3 or self._lb[cone.members[2]] < 0.0:
                continue
            ua, wa = self._ub[cone.members[0]], self._ub[cone.members[1]]
            mid = math.sqrt(wa / ua) if math.isfinite(ua) and math.isfinite(wa) and ua > 0 and wa > 0 else 1.0
            for k in mid * np.logspace(-2, 2, self.n_seeds):
                coeffs = {cone.members[0]: -k / math.sqrt(2.0), cone.members[1]: -1.0 / (k * math.sqrt(2.0)), cone.members[2]: cone.scale}
                out.append(Cut(LinRow(coeffs, "<=", 0.0, "oa"), "hyperbolic-oa", ("seed", float(k))))
        return out


def default_generators(model: ModelIR, polymatroid: str = "lazy", oa: str = "lazy") -> list[CutGenerator]:
    """Generators needed to make ``model``'s cones and hooks exact."""
    gens: list[CutGenerator] = []
    if model.hooks:
        gens.append(PolymatroidSeparator(model, polymatroid))
    if model.cones:
        gens.append(ConeOASeparator(model, oa))
    return gens
