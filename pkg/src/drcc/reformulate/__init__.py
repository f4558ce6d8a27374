"""Reformulations of risk-adjustable DRCC programs and their valid inequalities."""

from .binary import build_milp_binary
from .continuous import build_misocp_continuous
from .cuts import (
    ConeOASeparator,
    CutGenerator,
    PolymatroidCut,
    PolymatroidSeparator,
    SubmodularCoeffs,
    default_generators,
    greedy_vertex,
    hyperbolic_oa_cut,
    ordering_cuts,
    separate_polymatroid,
    star_cut,
    submodular_coeffs,
    window_pairs,
)
from .finite import FiniteOptions, build_milp_finite, build_milp_stochastic
from .instance import ChanceConstraint, DrccInstance, single_box_instance

MODELS = ("finite", "continuous", "stochastic", "milp-binary")


def build_model(kind: str, inst: DrccInstance, **opts):
    """Dispatch on the model name used by the command line."""
    if kind == "finite":
        return build_milp_finite(inst, opts.get("curves"), opts.get("finite", FiniteOptions()))
    if kind == "stochastic":
        return build_milp_stochastic(inst, opts.get("finite", FiniteOptions()))
    if kind == "continuous":
        return build_misocp_continuous(inst, opts.get("prune_pairs", False))
    if kind == "milp-binary":
        return build_milp_binary(inst, opts.get("prune_pairs", False))
    raise ValueError(f"unknown model {kind!r}; choose from {MODELS}")
