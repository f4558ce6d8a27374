"""Mixed 0-1 conic model for the full Wasserstein ball.

For ``k = floor(alpha N)`` and water level ``T x`` in ``[xi^{j+1}, xi^j]``
the flooded amount reaches ``eps`` iff

    (alpha N - j) (T x - xi^{k+1}) >= N eps + d_jk,
    d_jk = sum_{i=j+1}^{k} (xi^i - xi^{k+1}).

One binary ``o_jk`` per window pair selects ``(j, k)``; the bilinear
inequality is split as ``u w >= tau^2`` (a rotated cone, handled by tangent
cuts) and ``tau >= sqrt(N eps + d.o)`` (a submodular epigraph, handled by
extended polymatroid cuts).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..model import CONTINUOUS, ModelIR, SubmodularEpigraph
from .cuts import SubmodularCoeffs, submodular_coeffs, window_pairs
from .instance import ChanceConstraint, DrccInstance, top_level


@dataclass(frozen=True)
class Window:
    """Pair binaries and shared columns of one chance constraint."""

    o: tuple
    pairs: tuple
    alpha: int
    coeffs: SubmodularCoeffs
    top: float


def _check_linear_cost(inst: DrccInstance):
    for cc in inst.constraints:
        if not cc.cost.is_linear:
            raise ValueError("the pair-window models need a linear risk cost")


def add_window_block(m: ModelIR, inst: DrccInstance, i: int, prune_pairs: bool) -> Window:
    """Pair binaries, SOS1 row, level and tolerance windows, and ``T x >= xi^N``."""
    cc: ChanceConstraint = inst.constraints[i]
    s = cc.samples
    n = s.n
    if n < 2:
        raise ValueError(f"constraint {i} needs at least two samples")
    xi = s.values
    tag = cc.name or f"c{i}"
    k_max = int(math.floor(inst.bounds.alpha_bar * n + 1e-12)) if prune_pairs else None
    pairs = window_pairs(n, k_max)
    coeffs = submodular_coeffs(s, pairs)
    top = top_level(inst, cc)

    def level(idx):
        return top if idx == 0 else float(xi[idx - 1])

    o = [m.add_binary(f"o_{tag}_{j}_{k}") for j, k in pairs]
    alpha = m.add_variable(f"alpha_{tag}", CONTINUOUS, inst.bounds.alpha_min, inst.bounds.alpha_bar, note="risk tolerance")

    upper = dict(cc.t)
    lower = dict(cc.t)
    for oi, (j, k) in zip(o, pairs):
        upper[oi] = -level(j)
        lower[oi] = -level(j + 1)
    m.add_row(upper, "<=", 0.0, name=f"lvlhi_{tag}")
    m.add_row(lower, ">=", 0.0, name=f"lvllo_{tag}")
    klo = {alpha: float(n)}
    khi = {alpha: float(n)}
    for oi, (j, k) in zip(o, pairs):
        klo[oi] = -float(k)
        khi[oi] = -float(k + 1)
    m.add_row(klo, ">=", 0.0, name=f"klo_{tag}")
    m.add_row(khi, "<=", 0.0, name=f"khi_{tag}")
    m.add_row({oi: 1.0 for oi in o}, "=", 1.0, name=f"pick_{tag}")
    m.add_sos1(o, name=f"sos_{tag}")
    m.add_row(dict(cc.t), ">=", float(xi[-1]), name=f"floor_{tag}")
    return Window(tuple(o), tuple(pairs), alpha, coeffs, top)


def _objective(m: ModelIR, inst: DrccInstance, windows, kind: str) -> ModelIR:
    obj = inst.objective_terms()
    for cc, win in zip(inst.constraints, windows):
        obj[win.alpha] = obj.get(win.alpha, 0.0) + cc.cost.p
    m.set_objective(obj, inst.objective_constant)
    m.meta.update(
        kind=kind,
        x_indices=list(range(inst.d)),
        alpha_indices=[w.alpha for w in windows],
        windows=list(windows),
        preprocess_seconds=0.0,
    )
    return m.finalize()


def build_misocp_continuous(inst: DrccInstance, prune_pairs: bool = False) -> ModelIR:
    """Conic pair-window model.

    ``prune_pairs`` drops pairs with ``k > floor(alpha_bar N)``, which no
    admissible tolerance can select.
    """
    _check_linear_cost(inst)
    m = inst.base_model("continuous")
    windows = []
    for i, cc in enumerate(inst.constraints):
        win = add_window_block(m, inst, i, prune_pairs)
        n = cc.samples.n
        tag = cc.name or f"c{i}"
        xi_n = float(cc.samples.values[-1])
        sigma = win.coeffs.sigma
        w_top = win.top - xi_n
        u = m.add_variable(f"u_{tag}", CONTINUOUS, 0.0, inst.bounds.alpha_bar * n)
        w = m.add_variable(f"w_{tag}", CONTINUOUS, 0.0, w_top)
        tau_hi = max(math.sqrt(inst.bounds.alpha_bar * n * w_top), math.sqrt(sigma))
        tau = m.add_variable(f"tau_{tag}", CONTINUOUS, math.sqrt(sigma), tau_hi)
        urow = {u: 1.0, win.alpha: -float(n)}
        wrow = {w: 1.0}
        for j_, a in cc.t.items():
            wrow[j_] = -a
        for oi, (j, k) in zip(win.o, win.pairs):
            if j:
                urow[oi] = float(j)
            wrow[oi] = float(cc.samples.values[k])
        m.add_row(urow, "<=", 0.0, name=f"u_{tag}")
        m.add_row(wrow, "<=", 0.0, name=f"w_{tag}")
        m.add_cone("rotated-soc", (u, w, tau), name=f"hyp_{tag}", scale=math.sqrt(2.0))
        m.add_hook(SubmodularEpigraph(win.o, sigma, tuple(float(v) for v in win.coeffs.d), tau, f"sub_{tag}"))
        windows.append(win)
    return _objective(m, inst, windows, "continuous")
