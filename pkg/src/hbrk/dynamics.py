"""Heavy-ball dynamics in first-order form and the associated Lyapunov function.

The state is packed as ``y = [w; x]`` where ``w = v / sqrt(Q)`` is the
rescaled velocity.  All functions take and return flat arrays of length
``2 d`` so they plug directly into the integrators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, NumericError
from .objectives import Objective
from .order_conditions import TensorOracle

__all__ = [
    "HeavyBallState",
    "ConditionedProblem",
    "vector_field",
    "raw_vector_field",
    "heavy_ball_field",
    "heavy_ball_oracle",
    "lyapunov",
    "field_norm_bound_check",
]


@dataclass(frozen=True)
class HeavyBallState:
    w: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).ravel()
        x = np.asarray(self.x, dtype=float).ravel()
        if w.shape != x.shape:
            raise ValueError(f"w has dimension {w.size} but x has {x.size}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(x))):
            raise ValueError("state entries must be finite")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "x", x)

    @classmethod
    def at_rest(cls, x0) -> "HeavyBallState":
        x0 = np.asarray(x0, dtype=float)
        return cls(np.zeros_like(x0), x0)

    @classmethod
    def from_vector(cls, y) -> "HeavyBallState":
        y = np.asarray(y, dtype=float)
        d = y.size // 2
        return cls(y[:d], y[d:])

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.w, self.x])

    def velocity(self, Q: float) -> np.ndarray:
        return np.sqrt(Q) * self.w


@dataclass(frozen=True)
class ConditionedProblem:
    objective: Objective
    mu: float
    L: float

    def __post_init__(self):
        if not (self.mu > 0 and self.L >= self.mu):
            raise ValueError(f"need L >= mu > 0, got mu={self.mu!r}, L={self.L!r}")

    @classmethod
    def from_objective(cls, objective: Objective) -> "ConditionedProblem":
        return cls(objective, objective.mu, objective.L)

    @property
    def Q(self) -> float:
        return self.L / self.mu

    @property
    def dim(self) -> int:
        return self.objective.dim


def _grad(problem, x):
    g = problem.objective.gradient(x)
    if not np.all(np.isfinite(g)):
        raise NumericError("non-finite gradient", x=np.array(x, copy=True))
    return g


def vector_field(y, problem: ConditionedProblem) -> np.ndarray:
    """Rescaled heavy-ball field ``(-2w - grad f(x)/(mu sqrt Q), sqrt(Q) w)``."""
    y = np.asarray(y, dtype=float)
    d = y.size // 2
    w, x = y[:d], y[d:]
    sq = np.sqrt(problem.Q)
    g = _grad(problem, x)
    return np.concatenate([-2.0 * w - g / (problem.mu * sq), sq * w])


def raw_vector_field(y, problem: ConditionedProblem) -> np.ndarray:
    """Unscaled field on ``[v; x]``: ``(-2v - grad f(x)/mu, v)``."""
    y = np.asarray(y, dtype=float)
    d = y.size // 2
    v, x = y[:d], y[d:]
    g = _grad(problem, x)
    return np.concatenate([-2.0 * v - g / problem.mu, v])


def heavy_ball_field(problem: ConditionedProblem, raw: bool = False):
    fn = raw_vector_field if raw else vector_field
    return lambda y: fn(y, problem)


def heavy_ball_oracle(problem: ConditionedProblem) -> TensorOracle:
    """Derivative tensors of the rescaled field, built from those of the objective."""
    obj = problem.objective
    if obj.grad_derivative is None:
        raise CapabilityError(f"objective {obj.name!r} exposes no derivative tensors")
    d = problem.dim
    sq = np.sqrt(problem.Q)
    scale = problem.mu * sq

    def derivative(m, y, dirs):
        x = np.asarray(y, dtype=float)[d:]
        xs = [np.asarray(u, dtype=float)[d:] for u in dirs]
        top = -obj.grad_derivative(m, x, xs) / scale
        if m == 1:
            uw = np.asarray(dirs[0], dtype=float)[:d]
            return np.concatenate([top - 2.0 * uw, sq * uw])
        return np.concatenate([top, np.zeros(d)])

    return TensorOracle(heavy_ball_field(problem), derivative, max_order=64)


def lyapunov(y, problem: ConditionedProblem) -> float:
    """``2(f(x) - f*)/mu + Q/2 |w|^2 + 1/2 |x + sqrt(Q) w - x*|^2``."""
    obj = problem.objective
    if not obj.has_optimum:
        raise CapabilityError(f"objective {obj.name!r} has no reference optimum")
    y = np.asarray(y, dtype=float)
    d = y.size // 2
    w, x = y[:d], y[d:]
    Q = problem.Q
    r = x + np.sqrt(Q) * w - obj.x_star
    return float(
        2.0 * (obj.value(x) - obj.f_star) / problem.mu + 0.5 * Q * np.dot(w, w) + 0.5 * np.dot(r, r)
    )


def field_norm_bound_check(y, problem: ConditionedProblem) -> bool:
    F = vector_field(y, problem)
    return float(np.dot(F, F)) <= 25.0 * lyapunov(y, problem)
