"""Overlapping group Lasso via accelerated proximal gradient and a smooth dual prox."""

from .dual import DualVariable, duality_gap, solve_dual
from .groups import GroupStructure, PenaltyParams, group_stats, penalty_value, validate_groups
from .prox import ProxOptions, ProxSolution, identify_zero_groups, prox, reduce_problem, soft_threshold
from .solver import (
    DEFAULT_RHO_GRID,
    LeastSquaresLoss,
    SolverOptions,
    SolverResult,
    foglasso_solve,
    lambda_max,
    reg_path,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_RHO_GRID",
    "DualVariable",
    "GroupStructure",
    "LeastSquaresLoss",
    "PenaltyParams",
    "ProxOptions",
    "ProxSolution",
    "SolverOptions",
    "SolverResult",
    "duality_gap",
    "foglasso_solve",
    "group_stats",
    "identify_zero_groups",
    "lambda_max",
    "penalty_value",
    "prox",
    "reduce_problem",
    "reg_path",
    "soft_threshold",
    "solve_dual",
    "validate_groups",
]
