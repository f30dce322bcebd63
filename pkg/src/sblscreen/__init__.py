"""Sparse Bayesian learning accelerated by safe screening of features.

The outer loop solves a sequence of weighted l1 problems; before each inner
solve, a screening test (sphere, dome, or weighted two-hyperplane) removes
columns whose coefficients are provably zero at the optimum, shrinking the
problem without changing its solution.
"""

from .estimators import SparseBayesianRegressor, WeightedLassoRegressor
from .problem import (
    Partition,
    Problem,
    SparseSolution,
    WeightVector,
    lambda_max,
    normalize_columns,
    screening_percentage,
    speedup_factor,
)
from .sbl import SblConfig, SblState, run
from .screening import ScreenMask, pad_solution, reduce_problem, screen, w_tht_screen
from .wlasso import SolverConfig, solve

__version__ = "0.1.0"

__all__ = [
    "Partition",
    "Problem",
    "SparseSolution",
    "WeightVector",
    "lambda_max",
    "normalize_columns",
    "screening_percentage",
    "speedup_factor",
    "SolverConfig",
    "solve",
    "ScreenMask",
    "screen",
    "w_tht_screen",
    "reduce_problem",
    "pad_solution",
    "SblConfig",
    "SblState",
    "run",
    "SparseBayesianRegressor",
    "WeightedLassoRegressor",
    "__version__",
]
