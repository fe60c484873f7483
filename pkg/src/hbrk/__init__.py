"""Gradient methods from explicit Runge-Kutta discretization of the heavy-ball ODE."""

from .dynamics import ConditionedProblem, HeavyBallState, heavy_ball_field, lyapunov, vector_field
from .estimators import HeavyBallRKClassifier
from .integrate import integrate_n, reference_solve, rk_step
from .objectives import Objective, gaussian_mixture_data, logistic, quadratic, solve_optimum
from .optimizers import (
    Fixed,
    Scan,
    Theorem,
    Trace,
    direct_discretization,
    gradient_descent,
    nag,
    stability_scan,
    theoretical_step_size,
)
from .order_conditions import RootedTree, check_order, enumerate_trees, measured_order
from .tableau import ButcherTableau, builtin_tableaus, load_tableau, parse_tableau, tableau_for_order

__version__ = "0.1.0"

__all__ = [
    "ButcherTableau",
    "ConditionedProblem",
    "Fixed",
    "HeavyBallRKClassifier",
    "HeavyBallState",
    "Objective",
    "RootedTree",
    "Scan",
    "Theorem",
    "Trace",
    "builtin_tableaus",
    "check_order",
    "direct_discretization",
    "enumerate_trees",
    "gaussian_mixture_data",
    "gradient_descent",
    "heavy_ball_field",
    "integrate_n",
    "load_tableau",
    "logistic",
    "lyapunov",
    "measured_order",
    "nag",
    "parse_tableau",
    "quadratic",
    "reference_solve",
    "rk_step",
    "solve_optimum",
    "stability_scan",
    "tableau_for_order",
    "theoretical_step_size",
    "vector_field",
]
