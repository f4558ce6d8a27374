"""LP kernels, the branch-and-cut engine and brute-force oracles."""

from .bnc import Limits, SolveReport, branch_and_cut
from .lp import LpRelaxation, solve_lp
from .oracles import (
    OracleCapError,
    OracleInfeasible,
    oracle_finite_enum,
    oracle_grid,
    oracle_jk_enum,
    var_bisection_oracle,
)
from .simplex import Basis, LpProblem, LpSolution, simplex_solve
