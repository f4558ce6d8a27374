"""Risk-adjustable distributionally robust chance-constrained programs.

Worst-case value-at-risk over Wasserstein balls, exact reformulations with
their valid inequalities, a branch-and-cut solver, brute-force oracles and an
experiment harness.
"""

__version__ = "0.1.0"
