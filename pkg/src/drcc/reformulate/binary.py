"""Pure MILP form of the pair-window model when ``T x`` only touches binaries.

With ``e_jk = alpha o_jk``, ``delta_ljk = e_jk x_l`` and ``t_ljk = o_jk x_l``
the selected-pair inequality

    sum_jk o_jk [ (alpha N - j)(T x - xi^{k+1}) - d_jk ] >= N eps

becomes linear:

    sum_jk [ N T.delta_jk - j T.t_jk - N xi^{k+1} e_jk + (j xi^{k+1} - d_jk) o_jk ] >= N eps.

Every product has a binary factor, so the McCormick envelopes are exact at
integer points.
"""

from __future__ import annotations

from ..model import CONTINUOUS, ModelIR
from .continuous import _check_linear_cost, _objective, add_window_block
from .instance import DrccInstance


def build_milp_binary(inst: DrccInstance, prune_pairs: bool = False) -> ModelIR:
    _check_linear_cost(inst)
    m = inst.base_model("milp-binary")
    a_lo, a_hi = inst.bounds.alpha_min, inst.bounds.alpha_bar
    windows = []
    for i, cc in enumerate(inst.constraints):
        support = sorted(cc.t)
        bad = [inst.names[j] for j in support if not inst.binary[j]]
        if bad:
            raise ValueError(f"constraint {i}: technology row touches non-binary variables {bad}")
        win = add_window_block(m, inst, i, prune_pairs)
        tag = cc.name or f"c{i}"
        n = cc.samples.n
        xi = cc.samples.values
        prod = {}
        for oi, (j, k), d in zip(win.o, win.pairs, win.coeffs.d):
            lvl = float(xi[k])
            e = m.add_variable(f"e_{tag}_{j}_{k}", CONTINUOUS, 0.0, a_hi)
            m.add_row({e: 1.0, oi: -a_lo}, ">=", 0.0)
            m.add_row({e: 1.0, oi: -a_hi}, "<=", 0.0)
            m.add_row({e: 1.0, win.alpha: -1.0, oi: -a_hi}, ">=", -a_hi)
            m.add_row({e: 1.0, win.alpha: -1.0, oi: -a_lo}, "<=", -a_lo)
            prod[e] = prod.get(e, 0.0) - n * lvl
            prod[oi] = prod.get(oi, 0.0) + j * lvl - float(d)
            for ell in support:
                tl = cc.t[ell]
                dv = m.add_variable(f"dl_{tag}_{ell}_{j}_{k}", CONTINUOUS, 0.0, a_hi)
                m.add_row({dv: 1.0, e: -1.0}, "<=", 0.0)
                m.add_row({dv: 1.0, ell: -a_hi}, "<=", 0.0)
                m.add_row({dv: 1.0, e: -1.0, ell: -a_hi}, ">=", -a_hi)
                tv = m.add_variable(f"tl_{tag}_{ell}_{j}_{k}", CONTINUOUS, 0.0, 1.0)
                m.add_row({tv: 1.0, oi: -1.0}, "<=", 0.0)
                m.add_row({tv: 1.0, ell: -1.0}, "<=", 0.0)
                m.add_row({tv: 1.0, oi: -1.0, ell: -1.0}, ">=", -1.0)
                prod[dv] = n * tl
                if j:
                    prod[tv] = -j * tl
        m.add_row(prod, ">=", n * cc.samples.epsilon, name=f"prod_{tag}")
        windows.append(win)
    return _objective(m, inst, windows, "milp-binary")
