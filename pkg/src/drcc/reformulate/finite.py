"""Mixed-integer linear models over discrete tolerance levels.

``build_milp_finite`` covers the Wasserstein ball restricted to the sample
support: the worst-case VaR then only takes sample values, and the tolerance
``alpha_n`` at which it drops to ``xi^n`` is precomputed by bisection.
``build_milp_stochastic`` is the sample-average counterpart without a
ball, where dropping to ``xi^n`` costs tolerance ``(n-1)/N``.

In both models ``y_n = 1`` means ``T x >= xi^n`` is enforced, and at a
monotone ``y`` the smallest enforced level ``j`` fixes the risk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..model import CONTINUOUS, ModelIR
from ..samples import build_var_curve
from .cuts import ordering_rows, star_row
from .instance import DrccInstance


@dataclass(frozen=True)
class FiniteOptions:
    ordering_cuts: bool = True
    star_cut: bool = True
    star_replaces_bigM: bool = False
    bigm_multiplier: float = 1.0

    def __post_init__(self):
        if self.star_replaces_bigM and not self.ordering_cuts:
            raise ValueError("dropping the big-M rows needs the ordering rows to stay exact")
        if not self.bigm_multiplier >= 1.0:
            raise ValueError("big-M multiplier must be at least 1")


def _level_block(m: ModelIR, inst: DrccInstance, i: int, levels, alphas, costs, opts: FiniteOptions, alpha_lb: float, mode: str):
    """Level binaries, enforcement rows, tolerance row for constraint ``i``.

    ``alphas[n]`` is the tolerance reached when level ``n`` is the smallest
    one enforced and ``costs[n] = g(alphas[n])``; returns the objective terms.
    """
    cc = inst.constraints[i]
    npr = len(levels)
    tag = cc.name or f"c{i}"
    y = [m.add_binary(f"y_{tag}_{n + 1}", note=f"level {n + 1} enforced") for n in range(npr - 1)]
    a_idx = m.add_variable(f"alpha_{tag}", CONTINUOUS, alpha_lb, inst.bounds.alpha_bar, note="risk tolerance")
    last = float(levels[-1])
    if not y or opts.bigm_multiplier != 1.0:
        m.add_row(dict(cc.t), ">=", last, name=f"floor_{tag}")
    if not opts.star_replaces_bigM:
        for n, yi in enumerate(y):
            big = opts.bigm_multiplier * float(levels[n] - last)
            coeffs = dict(cc.t)
            coeffs[yi] = -big
            m.add_row(coeffs, ">=", float(levels[n]) - big, name=f"bigm_{tag}_{n + 1}")
    row = {a_idx: 1.0}
    for n, yi in enumerate(y):
        row[yi] = -float(alphas[n] - alphas[n + 1])
    m.add_row(row, "=", float(alphas[-1]), name=f"tol_{tag}")
    if y and (opts.ordering_cuts or mode == "stochastic"):
        for cut in ordering_rows(y):
            m.add_row(cut.row.coefficients, cut.row.sense, cut.row.rhs, name=f"{cut.row.name}_{tag}", note="cut ordering")
    if y and (opts.star_cut or opts.star_replaces_bigM or mode == "stochastic"):
        cut = star_row(levels, cc.t, y)
        m.add_row(cut.row.coefficients, cut.row.sense, cut.row.rhs, name=f"star_{tag}", note="cut star")
    obj = {}
    for n, yi in enumerate(y):
        obj[yi] = float(costs[n] - costs[n + 1])
    return y, a_idx, obj, float(costs[-1])


def _finish(m: ModelIR, inst: DrccInstance, obj: dict, const: float, groups, alpha_idx, kind: str):
    for j, a in inst.objective_terms().items():
        obj[j] = obj.get(j, 0.0) + a
    m.set_objective(obj, const + inst.objective_constant)
    m.meta.update(
        kind=kind,
        x_indices=list(range(inst.d)),
        alpha_indices=alpha_idx,
        monotone_groups=groups,
    )
    return m.finalize()


def build_milp_finite(inst: DrccInstance, curves=None, opts: FiniteOptions = FiniteOptions()) -> ModelIR:
    """Level-indicator MILP for the support-restricted ball.

    ``curves`` (one :class:`VarCurve` per chance constraint) are computed
    when not supplied. Objective: ``c.x + sum_n Delta_n y_n + g(alpha_{N'})``
    with ``Delta_n = g(alpha_n) - g(alpha_{n+1})``, which telescopes to
    ``g(alpha_j)`` at a monotone ``y`` with smallest one-index ``j``.
    """
    if curves is None:
        curves = [build_var_curve(cc.samples, inst.bounds) for cc in inst.constraints]
    if len(curves) != inst.n_constraints:
        raise ValueError("need one tolerance curve per chance constraint")
    m = inst.base_model("finite")
    obj, const, groups, alpha_idx = {}, 0.0, [], []
    t_bs = 0.0
    for i, (cc, curve) in enumerate(zip(inst.constraints, curves)):
        if curve.n_prime < 1:
            raise ValueError(f"empty tolerance curve for constraint {i}")
        costs = np.array([cc.cost(a) for a in curve.sample_alphas])
        y, a_idx, o, c0 = _level_block(m, inst, i, curve.levels, curve.sample_alphas, costs, opts, inst.bounds.alpha_min, "finite")
        obj.update(o)
        const += c0
        groups.append({"y": y, "levels": [float(v) for v in curve.levels[:-1]], "t": dict(cc.t)})
        alpha_idx.append(a_idx)
        t_bs += curve.preprocess_seconds
    m.meta["preprocess_seconds"] = t_bs
    m.meta["curves"] = list(curves)
    return _finish(m, inst, obj, const, groups, alpha_idx, "finite")


def build_milp_stochastic(inst: DrccInstance, opts: FiniteOptions = FiniteOptions()) -> ModelIR:
    """Sample-average MILP with ``N' = ceil(alpha_bar N)`` levels.

    Implied risk is ``(j-1)/N`` when level ``j`` is the smallest enforced
    (``y = 1`` everywhere gives zero risk and ``T x >= xi^1``). The star and
    ordering rows are always present; there are no big-M rows.
    """
    m = inst.base_model("stochastic")
    obj, const, groups, alpha_idx = {}, 0.0, [], []
    opts = FiniteOptions(True, True, True, opts.bigm_multiplier)
    for i, cc in enumerate(inst.constraints):
        n = cc.samples.n
        npr = int(math.ceil(inst.bounds.alpha_bar * n - 1e-12))
        if npr < 2:
            raise ValueError(f"alpha_bar * N = {inst.bounds.alpha_bar * n:g} leaves fewer than two levels for constraint {i}")
        levels = cc.samples.values[:npr]
        alphas = np.arange(npr) / n
        costs = np.array([cc.cost(a) for a in alphas])
        y, a_idx, o, c0 = _level_block(m, inst, i, levels, alphas, costs, opts, 0.0, "stochastic")
        obj.update(o)
        const += c0
        groups.append({"y": y, "levels": [float(v) for v in levels[:-1]], "t": dict(cc.t)})
        alpha_idx.append(a_idx)
    m.meta["preprocess_seconds"] = 0.0
    return _finish(m, inst, obj, const, groups, alpha_idx, "stochastic")
