"""Benchmark objectives: diagonal quadratic and L2-regularized logistic regression."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial
from scipy.special import expit

from .errors import OracleError

__all__ = [
    "Objective",
    "LabeledDataset",
    "EvalCounter",
    "counted",
    "quadratic",
    "logspace_lambdas",
    "gaussian_mixture_data",
    "logistic",
    "solve_optimum",
    "save_dataset",
    "load_dataset",
]


@dataclass(frozen=True)
class Objective:
    """A differentiable objective with its curvature constants.

    ``grad_derivative(m, x, dirs)`` returns the m-th derivative of the
    gradient at ``x`` applied to the ``m`` vectors in ``dirs`` (so ``m=1`` is a
    Hessian-vector product).  It is optional and only needed for
    elementary-differential evaluation and Newton polishing.
    """

    name: str
    dim: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    mu: float
    L: float
    x_star: np.ndarray | None = None
    f_star: float | None = None
    grad_derivative: Callable | None = None
    info: dict = field(default_factory=dict, compare=False)

    @property
    def Q(self) -> float:
        return self.L / self.mu

    @property
    def has_optimum(self) -> bool:
        return self.x_star is not None and self.f_star is not None

    def with_optimum(self, x_star, f_star) -> "Objective":
        return dataclasses.replace(self, x_star=np.asarray(x_star, dtype=float), f_star=float(f_star))

    def with_constants(self, mu: float | None = None, L: float | None = None) -> "Objective":
        return dataclasses.replace(
            self, mu=self.mu if mu is None else float(mu), L=self.L if L is None else float(L)
        )

    def hessian(self, x) -> np.ndarray:
        if self.grad_derivative is None:
            raise NotImplementedError(f"{self.name} has no derivative tensors")
        eye = np.eye(self.dim)
        return np.column_stack([self.grad_derivative(1, x, (eye[:, j],)) for j in range(self.dim)])


class EvalCounter:
    """Callable wrapper that counts invocations."""

    def __init__(self, fn):
        self.fn = fn
        self.calls = 0

    def __call__(self, *args, **kwargs):
        self.calls += 1
        return self.fn(*args, **kwargs)


def counted(objective: Objective) -> tuple[Objective, EvalCounter]:
    counter = EvalCounter(objective.gradient)
    return dataclasses.replace(objective, gradient=counter), counter


# -- quadratic -----------------------------------------------------------------


def logspace_lambdas(d: int = 50, kappa: float = 500.0) -> np.ndarray:
    """``d`` eigenvalues log-spaced in ``[1/kappa, 1]``."""
    if d == 1:
        return np.ones(1)
    return np.logspace(-np.log10(kappa), 0.0, d)


def quadratic(lambdas) -> Objective:
    """``f(x) = sum(lambda_i * x_i**2)``; note the missing 1/2, so L = 2*max(lambda)."""
    lam = np.array(lambdas, dtype=float).ravel()
    if lam.size == 0 or np.any(~(lam > 0)):
        raise ValueError("all lambda entries must be positive")
    lam.setflags(write=False)

    def value(x):
        x = np.asarray(x, dtype=float)
        return float(np.dot(lam * x, x))

    def gradient(x):
        return 2.0 * lam * np.asarray(x, dtype=float)

    def grad_derivative(m, x, dirs):
        if m == 1:
            return 2.0 * lam * np.asarray(dirs[0], dtype=float)
        return np.zeros(lam.size)

    d = lam.size
    return Objective(
        name="quadratic",
        dim=d,
        value=value,
        gradient=gradient,
        mu=2.0 * float(lam.min()),
        L=2.0 * float(lam.max()),
        x_star=np.zeros(d),
        f_star=0.0,
        grad_derivative=grad_derivative,
        info={"lambdas": lam},
    )


# -- logistic regression -------------------------------------------------------


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    certificate: np.ndarray | None = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.features, dtype=float))
        y = np.asarray(self.labels, dtype=float).ravel()
        if X.shape[0] != y.size:
            raise ValueError(f"{X.shape[0]} feature rows but {y.size} labels")
        if y.size and not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        if self.certificate is not None:
            u = np.asarray(self.certificate, dtype=float)
            if not np.all(y * (X @ u) > 0):
                raise ValueError("certificate direction does not separate the data")
            object.__setattr__(self, "certificate", u)

    @property
    def n_samples(self) -> int:
        return self.labels.size

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def gaussian_mixture_data(n_per_class: int, d: int, margin: float, seed: int) -> LabeledDataset:
    """Two unit-covariance Gaussian clusters at ``+/- margin * e1``, made separable.

    Points on the wrong side of ``margin/10`` along ``e1`` are reflected about
    their class mean's first coordinate, which puts them past ``margin``.
    """
    if n_per_class < 1 or d < 1:
        raise ValueError("n_per_class and d must be positive")
    if not margin > 0:
        raise ValueError("margin must be positive")
    rng = np.random.default_rng(seed)
    y = np.concatenate([np.ones(n_per_class), -np.ones(n_per_class)])
    X = rng.standard_normal((2 * n_per_class, d))
    X[:, 0] += margin * y
    bad = y * X[:, 0] < margin / 10
    X[bad, 0] = 2.0 * margin * y[bad] - X[bad, 0]
    u = np.zeros(d)
    u[0] = 1.0
    return LabeledDataset(X, y, certificate=u)


def save_dataset(path, data: LabeledDataset) -> None:
    table = np.column_stack([data.labels, data.features])
    np.savetxt(path, table, delimiter=",", fmt="%.17g")


def load_dataset(path) -> LabeledDataset:
    table = np.loadtxt(path, delimiter=",", ndmin=2)
    X, y = table[:, 1:], table[:, 0]
    u = np.zeros(X.shape[1])
    u[0] = 1.0
    cert = u if np.all(y * X[:, 0] > 0) else None
    return LabeledDataset(X, y, certificate=cert)


@lru_cache(maxsize=None)
def _softplus_neg_derivative(k: int) -> Polynomial:
    """k-th derivative of ``z -> log(1 + exp(-z))`` as a polynomial in ``s = sigmoid(z)``."""
    if k == 1:
        return Polynomial([-1.0, 1.0])
    prev = _softplus_neg_derivative(k - 1)
    return prev.deriv() * Polynomial([0.0, 1.0, -1.0])


def logistic(data: LabeledDataset, gamma: float) -> Objective:
    """Regularized logistic loss ``sum log(1 + exp(-y_i <x_i, w>)) + gamma/2 |w|^2``.

    The optimum is computed eagerly with :func:`solve_optimum`.
    """
    if data.n_samples == 0:
        raise ValueError("empty dataset")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    X, y = data.features, data.labels
    yX = y[:, None] * X
    gamma = float(gamma)

    def value(w):
        w = np.asarray(w, dtype=float)
        z = yX @ w
        return float(np.sum(np.logaddexp(0.0, -z)) + 0.5 * gamma * np.dot(w, w))

    def gradient(w):
        w = np.asarray(w, dtype=float)
        z = yX @ w
        return yX.T @ (-expit(-z)) + gamma * w

    def grad_derivative(m, w, dirs):
        w = np.asarray(w, dtype=float)
        s = expit(yX @ w)
        coef = _softplus_neg_derivative(m + 1)(s)
        for u in dirs:
            coef = coef * (yX @ np.asarray(u, dtype=float))
        out = yX.T @ coef
        if m == 1:
            out = out + gamma * np.asarray(dirs[0], dtype=float)
        return out

    lam_max = float(np.linalg.eigvalsh(X.T @ X)[-1])
    obj = Objective(
        name="logistic",
        dim=X.shape[1],
        value=value,
        gradient=gradient,
        mu=gamma,
        L=gamma + 0.25 * lam_max,
        grad_derivative=grad_derivative,
        info={"gamma": gamma, "n_samples": data.n_samples},
    )
    x_star, f_star = solve_optimum(obj)
    return obj.with_optimum(x_star, f_star)


# -- optimum -------------------------------------------------------------------


def solve_optimum(
    objective: Objective,
    tol: float = 1e-12,
    x0=None,
    method: str = "auto",
    max_iter: int = 1_000_000,
) -> tuple[np.ndarray, float]:
    """Minimize until ``|grad f| <= tol * max(1, L)``.

    ``method="gd"`` runs gradient descent with step ``1/L``.  ``"newton"``
    uses damped Newton steps built from ``grad_derivative``; ``"auto"`` picks
    Newton when derivative tensors are available.
    """
    if method == "auto":
        method = "newton" if objective.grad_derivative is not None else "gd"
    if method not in ("gd", "newton"):
        raise ValueError(f"unknown method {method!r}")
    x = np.zeros(objective.dim) if x0 is None else np.array(x0, dtype=float)
    thresh = tol * max(1.0, objective.L)
    g = objective.gradient(x)
    gnorm = float(np.linalg.norm(g))
    for _ in range(max_iter):
        if gnorm <= thresh:
            return x, objective.value(x)
        if method == "gd":
            x = x - g / objective.L
        else:
            p = -np.linalg.solve(objective.hessian(x), g)
            fx, t, slope = objective.value(x), 1.0, float(g @ p)
            while objective.value(x + t * p) > fx + 1e-4 * t * slope and t > 1e-12:
                t *= 0.5
            if t <= 1e-12:
                # sufficient decrease is unresolvable at roundoff level
                t = 1.0
            x = x + t * p
        g = objective.gradient(x)
        gnorm = float(np.linalg.norm(g))
    raise OracleError(f"optimum solve did not converge; final gradient norm {gnorm:.3e}")
