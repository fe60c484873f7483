"""Property suites run by ``hbrk verify``.

Each check returns a :class:`CheckResult`; ``margin`` is the worst-case slack
(positive means the property held with room to spare).  All randomness comes
from ``numpy.random.default_rng(seed)`` (PCG64).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dynamics import ConditionedProblem, heavy_ball_field, heavy_ball_oracle, lyapunov, vector_field
from .integrate import reference_solve, reference_trajectory
from .objectives import Objective, gaussian_mixture_data, logistic, logspace_lambdas, quadratic
from .order_conditions import (
    check_order,
    enumerate_trees,
    max_certified_order,
    measured_order,
    solution_derivative,
)
from .tableau import builtin_tableaus, euler_tableau, midpoint_tableau, rk4_classic_tableau

SUITES = ("order", "lyapunov", "lemmas", "assumptions")


@dataclass
class CheckResult:
    name: str
    anchor: str
    passed: bool
    margin: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}  [{self.anchor}]  margin={self.margin:.3e}  {self.detail}"


# -- reference problems --------------------------------------------------------------


def kappa500_quadratic(d: int = 50) -> Objective:
    return quadratic(logspace_lambdas(d, 500.0))


def default_logistic(n: int = 200, d: int = 20, margin: float = 5.0, gamma: float = 1e-2, seed: int = 42):
    return logistic(gaussian_mixture_data(n // 2, d, margin, seed), gamma)


def small_quadratic() -> Objective:
    return quadratic([1.0, 4.0])


def small_logistic() -> Objective:
    """Mildly nonlinear two-dimensional problem used for order measurements."""
    return logistic(gaussian_mixture_data(5, 2, 1.0, seed=7), gamma=1.0)


def random_states(problem: ConditionedProblem, n: int, rng) -> np.ndarray:
    """States around ``[0; x*]`` with per-sample scales spread over five decades."""
    d = problem.dim
    scale_w = 10.0 ** rng.uniform(-3, 2, size=(n, 1))
    scale_x = 10.0 ** rng.uniform(-3, 2, size=(n, 1))
    w = scale_w * rng.standard_normal((n, d))
    x = problem.objective.x_star + scale_x * rng.standard_normal((n, d))
    return np.hstack([w, x])


# -- order ----------------------------------------------------------------------------


def check_tree_counts() -> CheckResult:
    counts = [len(enumerate_trees(q)) for q in range(1, 7)]
    ok = counts == [1, 1, 2, 4, 9, 20]
    return CheckResult("tree counts q=1..6", "rooted tree enumeration", ok, 0.0, str(counts))


def check_algebraic_orders() -> list[CheckResult]:
    out = []
    for name, tab in builtin_tableaus().items():
        s = tab.claimed_order
        hit = check_order(tab, s)
        miss = check_order(tab, s + 1)
        worst = max((abs(phi - t) for _, phi, t in hit.violations), default=0.0)
        out.append(
            CheckResult(
                f"algebraic order {name}",
                "order conditions Phi(tree) = 1/density(tree)",
                hit.ok and not miss.ok,
                1e-10 - worst,
                f"order {s} ok={hit.ok}, order {s + 1} violations={len(miss.violations)}",
            )
        )
    return out


def check_measured_orders() -> list[CheckResult]:
    problem = ConditionedProblem.from_objective(small_quadratic())
    field = heavy_ball_field(problem)
    y0 = np.array([0.0, 0.0, 1.0, 1.0])
    out = []
    for tab, expect, k_range in (
        (euler_tableau(), 1, (6, 11)),
        (midpoint_tableau(), 2, (4, 9)),
        (rk4_classic_tableau(), 4, (3, 7)),
    ):
        slope = measured_order(tab, field, y0, 1.0, k_range=k_range)
        out.append(
            CheckResult(
                f"measured order {tab.name}",
                "discretization error O(h^(s+1)) per step",
                abs(slope - expect) <= 0.2,
                0.2 - abs(slope - expect),
                f"slope={slope:.4f}",
            )
        )
    return out


def check_order_agreement() -> list[CheckResult]:
    """Empirical order on a nonlinear system matches the algebraic certificate."""
    problem = ConditionedProblem.from_objective(small_logistic())
    field = heavy_ball_field(problem)
    y0 = np.concatenate([np.zeros(2), np.array([1.0, -0.5])])
    ranges = {1: (6, 11), 2: (5, 10), 3: (4, 9), 4: (3, 8), 5: (3, 7)}
    out = []
    for name, tab in builtin_tableaus().items():
        algebraic = max_certified_order(tab)
        slope = measured_order(tab, field, y0, 1.0, k_range=ranges[algebraic])
        out.append(
            CheckResult(
                f"order agreement {name}",
                "algebraic vs empirical order",
                round(slope) == algebraic,
                0.5 - abs(slope - algebraic),
                f"slope={slope:.3f} certified={algebraic}",
            )
        )
    return out


# -- lyapunov -------------------------------------------------------------------------


def check_continuous_contraction(
    objective: Objective, x0, times=(0.5, 1.0, 2.0, 5.0, 10.0), slack: float = 1.05, tol: float = 1e-9
) -> CheckResult:
    problem = ConditionedProblem.from_objective(objective)
    field = heavy_ball_field(problem)
    y0 = np.concatenate([np.zeros_like(x0), x0])
    E0 = lyapunov(y0, problem)
    states = reference_trajectory(field, y0, times, tol=tol)
    ratios = [lyapunov(y, problem) / (slack * E0 * math.exp(-t / 2)) for t, y in zip(times, states)]
    worst = max(ratios)
    return CheckResult(
        f"continuous contraction ({objective.name})",
        "Lyapunov decay dE/dt <= -E/2",
        worst <= 1.0,
        1.0 - worst,
        "ratios=" + ",".join(f"{r:.3g}" for r in ratios),
    )


def check_small_h_bound(objective: Objective, n_states: int = 100, seed: int = 0) -> CheckResult:
    problem = ConditionedProblem.from_objective(objective)
    field = heavy_ball_field(problem)
    h = 1.0 / (10.0 * math.sqrt(problem.Q))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for y0 in random_states(problem, n_states, rng):
        E0 = lyapunov(y0, problem)
        Eh = lyapunov(reference_solve(field, y0, h, tol=1e-12 * max(1.0, np.abs(y0).max())), problem)
        worst = max(worst, Eh / E0)
    return CheckResult(
        f"small-h boundedness ({objective.name})",
        "h <= 1/(10 sqrt Q) implies E(y(h)) <= 3 E(y(0))",
        worst <= 3.0,
        3.0 - worst,
        f"max ratio={worst:.4f}",
    )


# -- lemmas ---------------------------------------------------------------------------


def check_norm_bound(objective: Objective, n_states: int = 1000, seed: int = 0) -> CheckResult:
    problem = ConditionedProblem.from_objective(objective)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for y in random_states(problem, n_states, rng):
        F = vector_field(y, problem)
        worst = max(worst, float(F @ F) / lyapunov(y, problem))
    return CheckResult(
        f"field norm bound ({objective.name})",
        "|F(y)|^2 <= 25 E(y)",
        worst <= 25.0,
        25.0 - worst,
        f"max |F|^2/E={worst:.4f}",
    )


def fd_weights(offsets, q: int) -> np.ndarray:
    """Finite-difference weights for the q-th derivative at 0 from samples at ``offsets``."""
    offsets = np.asarray(offsets, dtype=float)
    n = offsets.size
    V = np.array([offsets**k / math.factorial(k) for k in range(n)])
    rhs = np.zeros(n)
    rhs[q] = 1.0
    return np.linalg.solve(V, rhs)


def flow_samples(field: Callable, y, offsets, tol: float = 1e-13) -> np.ndarray:
    """Exact-flow samples ``y(t)`` at the given signed times (backward via the negated field)."""
    out = []
    for t in offsets:
        if t > 0:
            out.append(reference_solve(field, y, t, tol=tol))
        elif t < 0:
            out.append(reference_solve(lambda z: -field(z), y, -t, tol=tol))
        else:
            out.append(np.asarray(y, dtype=float))
    return np.array(out)


def check_solution_derivatives(objective: Objective | None = None, seed: int = 0, delta: float = 0.005) -> CheckResult:
    objective = kappa500_quadratic(d=4) if objective is None else objective
    problem = ConditionedProblem.from_objective(objective)
    rng = np.random.default_rng(seed)
    y = random_states(problem, 1, rng)[0]
    y = y / np.abs(y).max()
    oracle = heavy_ball_oracle(problem)
    offsets = delta * np.arange(-5, 6)
    samples = flow_samples(heavy_ball_field(problem), y, offsets)
    worst = 0.0
    for q in (1, 2, 3):
        exact = solution_derivative(q, oracle, y)
        fd = fd_weights(offsets, q) @ samples
        worst = max(worst, float(np.linalg.norm(fd - exact) / np.linalg.norm(exact)))
    return CheckResult(
        f"solution derivatives q<=3 ({objective.name})",
        "sum over trees alpha F(tree) equals y^(q)",
        worst <= 1e-5,
        1e-5 - worst,
        f"max rel err={worst:.2e}",
    )


# -- assumptions ----------------------------------------------------------------------


def _sample_points(objective: Objective, n: int, rng) -> np.ndarray:
    scale = 10.0 ** rng.uniform(-3, 1.5, size=(n, 1))
    return objective.x_star + scale * rng.standard_normal((n, objective.dim))


def check_quasi_strong_convexity(objective: Objective, n: int = 1000, seed: int = 0, slack: float = 1e-8):
    rng = np.random.default_rng(seed)
    xs, fs, mu = objective.x_star, objective.f_star, objective.mu
    worst = math.inf
    for x in _sample_points(objective, n, rng):
        rhs = objective.value(x) + objective.gradient(x) @ (xs - x) + 0.5 * mu * np.sum((x - xs) ** 2)
        worst = min(worst, (fs - rhs) / (1.0 + abs(rhs)))
    return CheckResult(
        f"quasi-strong convexity ({objective.name})",
        "f* >= f(x) + <grad f(x), x*-x> + mu/2 |x-x*|^2",
        worst >= -slack,
        worst + slack,
    )


def check_smoothness(objective: Objective, n: int = 1000, seed: int = 0, slack: float = 1e-8):
    rng = np.random.default_rng(seed)
    a = _sample_points(objective, n, rng)
    b = _sample_points(objective, n, rng)
    worst = 0.0
    for x, y in zip(a, b):
        num = np.linalg.norm(objective.gradient(x) - objective.gradient(y))
        worst = max(worst, num / (objective.L * np.linalg.norm(x - y)))
    return CheckResult(
        f"L-smoothness ({objective.name})",
        "|grad f(x) - grad f(y)| <= L |x-y|",
        worst <= 1.0 + slack,
        1.0 + slack - worst,
        f"max ratio={worst:.4f}",
    )


def check_gradient_gap(objective: Objective, n: int = 1000, seed: int = 0, slack: float = 1e-8):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for x in _sample_points(objective, n, rng):
        g = objective.gradient(x)
        gap = objective.value(x) - objective.f_star
        bound = 2.0 * objective.L * gap
        if bound > 0:
            worst = max(worst, float(g @ g) / bound)
        elif float(g @ g) > slack:
            worst = math.inf
    return CheckResult(
        f"gradient/gap inequality ({objective.name})",
        "|grad f|^2 <= 2 L (f - f*)",
        worst <= 1.0 + slack,
        1.0 + slack - worst,
        f"max ratio={worst:.4f}",
    )


# -- suites ---------------------------------------------------------------------------


def run_suite(name: str) -> list[CheckResult]:
    if name == "all":
        return [r for s in SUITES for r in run_suite(s)]
    if name == "order":
        return [check_tree_counts(), *check_algebraic_orders(), *check_measured_orders(), *check_order_agreement()]
    quad, logi = kappa500_quadratic(), default_logistic()
    if name == "lyapunov":
        return [
            check_continuous_contraction(quad, np.ones(quad.dim)),
            check_continuous_contraction(logi, np.ones(logi.dim)),
            check_small_h_bound(quad),
        ]
    if name == "lemmas":
        return [check_norm_bound(quad), check_norm_bound(logi), check_solution_derivatives()]
    if name == "assumptions":
        return [
            check(obj)
            for obj in (quad, logi)
            for check in (check_quasi_strong_convexity, check_smoothness, check_gradient_gap)
        ]
    raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES + ('all',))}")
