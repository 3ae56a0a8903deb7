"""Constrained training through multiplier-weighted regularization: problem
library, grid and descent solvers, multiplier search, and attainability analysis."""

__version__ = "0.1.0"

from .core import (
    ContractViolation,
    EvaluationError,
    InstanceDefinitionError,
    ParamSpace,
    Problem,
    SolveResult,
    eval_loss,
    eval_regularized,
    eval_violation,
    is_feasible,
)
from .instances import BUNDLED, InstanceSpec, balance_penalty, hinge_order_penalty, make_instance
from .solvers import (
    BudgetExceeded,
    DescentConfig,
    GridSpec,
    finite_diff_grad,
    solve_pc_grid,
    solve_pr_descent,
    solve_pr_grid,
)
from .search import LambdaStrategy, Pr4pcOutcome, binary_search_multiplier, dual_ascent, pr4pc
from .analysis import (
    attainability_halfspaces,
    check_theorem1,
    monotonicity_scan,
    multiplier_interval,
    multiplier_region_feasible,
    sensitivity_curve,
)

__all__ = [
    "BUNDLED",
    "BudgetExceeded",
    "ContractViolation",
    "DescentConfig",
    "EvaluationError",
    "GridSpec",
    "InstanceDefinitionError",
    "InstanceSpec",
    "LambdaStrategy",
    "ParamSpace",
    "Pr4pcOutcome",
    "Problem",
    "SolveResult",
    "attainability_halfspaces",
    "balance_penalty",
    "binary_search_multiplier",
    "check_theorem1",
    "dual_ascent",
    "eval_loss",
    "eval_regularized",
    "eval_violation",
    "finite_diff_grad",
    "hinge_order_penalty",
    "is_feasible",
    "make_instance",
    "monotonicity_scan",
    "multiplier_interval",
    "multiplier_region_feasible",
    "pr4pc",
    "sensitivity_curve",
    "solve_pc_grid",
    "solve_pr_descent",
    "solve_pr_grid",
]
