"""scikit-learn compatible wrapper: logistic regression fitted by heavy-ball RK discretization."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.linear_model._base import LinearClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import validate_data

from .dynamics import ConditionedProblem
from .objectives import LabeledDataset, logistic
from .optimizers import Fixed, Scan, Theorem, direct_discretization, gradient_descent, nag
from .tableau import tableau_for_order


class HeavyBallRKClassifier(LinearClassifierMixin, BaseEstimator):
    """Binary L2-regularized logistic regression solved by direct RK discretization.

    Parameters
    ----------
    gamma : float
        Ridge strength; also used as the strong-convexity constant.
    solver : {"dd", "gd", "nag"}
        ``"dd"`` integrates the rescaled heavy-ball ODE; the others are baselines.
    order : int
        Order of the built-in RK method used by ``"dd"``.
    step : "scan", "theorem" or float
        Step policy for ``"dd"`` and ``"gd"``.  ``"scan"`` picks the largest
        stable power of ten in ``z_range``.
    fit_intercept : bool
        Append a constant feature.  The intercept is regularized like the
        other weights.
    """

    def __init__(
        self,
        gamma=1e-2,
        solver="dd",
        order=4,
        step="scan",
        z_range=(-6, 2),
        max_grad_evals=200_000,
        tol=1e-9,
        fit_intercept=True,
    ):
        self.gamma = gamma
        self.solver = solver
        self.order = order
        self.step = step
        self.z_range = z_range
        self.max_grad_evals = max_grad_evals
        self.tol = tol
        self.fit_intercept = fit_intercept

    def _design(self, X):
        if self.fit_intercept:
            return np.column_stack([X, np.ones(X.shape[0])])
        return X

    def _policy(self):
        if self.step == "scan":
            return Scan(self.z_range[0], self.z_range[1])
        if self.step == "theorem":
            return Theorem(1.0)
        return Fixed(float(self.step))

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64)
        check_classification_targets(y)
        self.classes_ = np.unique(y)
        if self.classes_.size != 2:
            raise ValueError(f"{type(self).__name__} is a binary classifier; got {self.classes_.size} classes")
        signs = np.where(y == self.classes_[1], 1.0, -1.0)
        Z = self._design(X)
        obj = logistic(LabeledDataset(Z, signs), self.gamma)
        x0 = np.zeros(Z.shape[1])

        if self.solver == "dd":
            trace = direct_discretization(
                ConditionedProblem.from_objective(obj),
                x0,
                tableau_for_order(self.order),
                self._policy(),
                budget=self.max_grad_evals,
                target=self.tol,
            )
        elif self.solver == "gd":
            h = None if self.step in ("scan", "theorem") else float(self.step)
            trace = gradient_descent(obj, x0, h=h, budget=self.max_grad_evals, target=self.tol)
        elif self.solver == "nag":
            trace = nag(obj, x0, budget=self.max_grad_evals, target=self.tol)
        else:
            raise ValueError(f"unknown solver {self.solver!r}")
        w = trace.x_final
        if trace.outcome == "diverged":
            raise RuntimeError(f"{self.solver} diverged while fitting")

        self.trace_ = trace
        self.n_iter_ = trace.final.iteration
        self.n_grad_evals_ = trace.final.grad_evals
        if self.fit_intercept:
            self.coef_, self.intercept_ = w[None, :-1], np.array([w[-1]])
        else:
            self.coef_, self.intercept_ = w[None, :], np.zeros(1)
        return self
