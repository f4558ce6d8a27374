"""Scenario samples and the worst-case value-at-risk engine.

The Wasserstein ball of radius ``epsilon`` around the empirical distribution of
``N`` scalar samples admits a water-filling description: a region of width
``alpha`` over the sorted sample "terrain" is flooded with an amount
``epsilon`` of water, and the resulting water level is the worst-case VaR.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import kernels

DEFAULT_BISECT_TOL = 1e-10
DEFAULT_RESIDUAL_TOL = 1e-9


class InfeasibleCurveError(ValueError):
    """No sample level can be reached with a tolerance in the allowed window."""


def _check_alpha(alpha):
    if not (0.0 < alpha < 1.0) or math.isnan(alpha):
        raise ValueError(f"risk tolerance must lie in (0, 1), got {alpha!r}")


@dataclass(frozen=True)
class SampleSet:
    """Scalar scenario samples with a Wasserstein radius.

    ``values`` is stored sorted non-increasing whatever order it was given in;
    the empirical distribution puts mass ``1/N`` on each entry, duplicates
    included.
    """

    values: np.ndarray
    epsilon: float

    def __post_init__(self):
        vals = np.sort(np.asarray(self.values, dtype=float).ravel())[::-1].copy()
        if vals.size < 1:
            raise ValueError("a sample set needs at least one value")
        if not np.all(np.isfinite(vals)):
            raise ValueError("sample values must be finite")
        eps = float(self.epsilon)
        if not (eps > 0.0) or not math.isfinite(eps):
            raise ValueError(f"Wasserstein radius must be positive, got {self.epsilon!r}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "epsilon", eps)

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def level(self, index: int) -> float:
        """Sample ``xi^index`` with 1-based indexing."""
        return float(self.values[index - 1])

    def __eq__(self, other):
        if not isinstance(other, SampleSet):
            return NotImplemented
        return self.epsilon == other.epsilon and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.epsilon, self.values.tobytes()))


@dataclass(frozen=True)
class RiskCost:
    """Monotone penalty ``g(alpha)`` on the chosen risk tolerance.

    ``kind="linear"`` gives ``g(alpha) = p * alpha``. ``kind="custom"`` takes an
    arbitrary ``evaluator``; monotonicity and nonnegativity are spot-checked on
    a grid at construction.
    """

    kind: str = "linear"
    p: float = 1.0
    evaluator: Optional[Callable[[float], float]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind == "linear":
            if not (self.p >= 0.0) or not math.isfinite(self.p):
                raise ValueError("linear risk cost needs a finite p >= 0")
        elif self.kind == "custom":
            if self.evaluator is None:
                raise ValueError("custom risk cost needs an evaluator")
            grid = np.linspace(0.0, 0.999, 201)
            vals = np.array([float(self.evaluator(a)) for a in grid])
            if np.any(vals < 0.0) or np.any(np.diff(vals) < -1e-12):
                raise ValueError("custom risk cost must be nonnegative and nondecreasing")
        else:
            raise ValueError(f"unknown risk cost kind {self.kind!r}")

    def __call__(self, alpha: float) -> float:
        if self.kind == "linear":
            return self.p * alpha
        return float(self.evaluator(alpha))

    @property
    def is_linear(self) -> bool:
        return self.kind == "linear"


@dataclass(frozen=True)
class RiskBounds:
    alpha_bar: float
    alpha_min: float = 1e-6

    def __post_init__(self):
        if not (0.0 < self.alpha_min < self.alpha_bar < 1.0):
            raise ValueError(
                f"need 0 < alpha_min < alpha_bar < 1, got alpha_min={self.alpha_min}, "
                f"alpha_bar={self.alpha_bar}"
            )


@dataclass(frozen=True)
class VarCurve:
    """Discrete tolerances ``alpha_n`` at which the finite-support VaR equals ``xi^n``."""

    sample_alphas: np.ndarray
    levels: np.ndarray
    preprocess_seconds: float = 0.0

    @property
    def n_prime(self) -> int:
        return int(self.sample_alphas.shape[0])


class VarPoint(NamedTuple):
    continuous: float
    finite: float
    critical_index: Optional[int]

    @property
    def overflow(self) -> bool:
        return self.critical_index is None


# ---------------------------------------------------------------------------


def partial_sum_excess(samples: SampleSet, v: float, alpha: float) -> float:
    """Water needed to flood the width-``alpha`` region up to level ``v``.

    Evaluates ``(1/N) sum_{n=1}^{alpha N} (v - xi^n)^+`` where the last term is
    weighted by the fractional part of ``alpha N``.
    """
    _check_alpha(alpha)
    return float(kernels.water(samples.values, float(v), float(alpha)))


def critical_index(samples: SampleSet, alpha: float) -> Optional[int]:
    """Largest 1-based index whose level floods at least ``epsilon``; ``None`` if none."""
    _check_alpha(alpha)
    j = int(kernels.critical_index(samples.values, samples.epsilon, float(alpha)))
    return j if j > 0 else None


def var_point(samples: SampleSet, alpha: float) -> VarPoint:
    """Both worst-case VaRs plus the critical index in one pass."""
    _check_alpha(alpha)
    out_c = np.empty(1)
    out_d = np.empty(1)
    out_j = np.empty(1, dtype=np.int64)
    kernels.var_continuous(samples.values, samples.epsilon, np.array([float(alpha)]), out_c, out_d, out_j)
    j = int(out_j[0])
    return VarPoint(float(out_c[0]), float(out_d[0]), j if j > 0 else None)


def var_many(samples: SampleSet, alphas) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized :func:`var_point`: ``(continuous, finite, critical_index)`` arrays."""
    alphas = np.ascontiguousarray(alphas, dtype=float)
    if alphas.size and (alphas.min() <= 0.0 or alphas.max() >= 1.0):
        raise ValueError("risk tolerances must lie in (0, 1)")
    out_c = np.empty(alphas.shape[0])
    out_d = np.empty(alphas.shape[0])
    out_j = np.empty(alphas.shape[0], dtype=np.int64)
    kernels.var_continuous(samples.values, samples.epsilon, alphas, out_c, out_d, out_j)
    return out_c, out_d, out_j


def worst_case_var_continuous(samples: SampleSet, alpha: float) -> float:
    return var_point(samples, alpha).continuous


def worst_case_var_finite(samples: SampleSet, alpha: float) -> float:
    """Finite-support worst-case VaR ``xi^{j*}``.

    When no critical index exists the overflow water level is returned (it is
    above ``xi^1``); :func:`var_point` exposes the flag.
    """
    return var_point(samples, alpha).finite


def empirical_quantile(samples: SampleSet, alpha: float) -> float:
    """Empirical (1 - alpha)-quantile: the (floor(alpha N) + 1)-th largest sample."""
    _check_alpha(alpha)
    k = min(int(math.floor(alpha * samples.n + kernels.GUARD)), samples.n - 1)
    return float(samples.values[k])


def alpha_for_level(samples: SampleSet, level_index: int, tol: float = DEFAULT_BISECT_TOL) -> Optional[float]:
    """Smallest tolerance whose flood at level ``xi^level_index`` reaches ``epsilon``.

    Bisection on the flooded amount, which is nondecreasing in ``alpha``. The
    returned value is the upper end of the final bracket, so it always floods
    at least ``epsilon``. ``None`` when no ``alpha < 1`` is enough.
    """
    if not 1 <= level_index <= samples.n:
        raise IndexError(f"level index {level_index} outside 1..{samples.n}")
    a = float(kernels.alpha_bisect(samples.values, samples.level(level_index), samples.epsilon, tol))
    return None if a < 0.0 else a


def alpha_for_level_exact(samples: SampleSet, level_index: int) -> Optional[float]:
    """Closed-form counterpart of :func:`alpha_for_level`.

    For a fixed level the flooded amount is piecewise linear in ``alpha N``
    with breakpoints at the integers; solve on the first piece that reaches
    ``N * epsilon``.
    """
    if not 1 <= level_index <= samples.n:
        raise IndexError(f"level index {level_index} outside 1..{samples.n}")
    xi = samples.values
    n = samples.n
    v = float(xi[level_index - 1])
    target = n * samples.epsilon
    base = 0.0
    for k in range(n):
        slope = max(v - float(xi[k]), 0.0)
        if base + slope >= target and slope > 0.0:
            an = k + (target - base) / slope
            if an >= n:
                return None
            return an / n
        base += slope
    return None


def build_var_curve(samples: SampleSet, bounds: RiskBounds, tol: float = DEFAULT_BISECT_TOL) -> VarCurve:
    """Tolerances ``alpha_1 <= ... <= alpha_N'`` for the attainable sample levels.

    Levels whose tolerance is below ``alpha_min`` are clamped up to it (the
    level is still met there); levels needing more than ``alpha_bar`` or no
    tolerance at all end the prefix.
    """
    start = time.perf_counter()
    raw = np.empty(samples.n)
    kernels.alpha_levels(samples.values, samples.epsilon, tol, raw)
    alphas = []
    for a in raw:
        if a < 0.0 or a > bounds.alpha_bar:
            break
        alphas.append(max(float(a), bounds.alpha_min))
    elapsed = time.perf_counter() - start
    if not alphas:
        raise InfeasibleCurveError(
            "no sample level is attainable with a risk tolerance in "
            f"[{bounds.alpha_min}, {bounds.alpha_bar}]"
        )
    arr = np.array(alphas)
    arr.flags.writeable = False
    lv = samples.values[: arr.size].copy()
    lv.flags.writeable = False
    return VarCurve(arr, lv, elapsed)
