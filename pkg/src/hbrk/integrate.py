"""Fixed-step explicit Runge-Kutta integration and a step-halving reference solver."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DivergenceError, OracleError
from .tableau import ButcherTableau, rk4_classic_tableau

Field = Callable[[np.ndarray], np.ndarray]

#: iterates whose max-norm exceeds this are treated as diverged
BLOWUP_BOUND = 1e100


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    grad_evals: np.ndarray
    error: DivergenceError | None = None

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _check_finite(v, stage, step=None):
    if not np.all(np.isfinite(v)) or np.max(np.abs(v), initial=0.0) > BLOWUP_BOUND:
        raise DivergenceError(f"non-finite or blown-up value at stage {stage}", stage=stage, step=step)


def rk_step(
    tableau: ButcherTableau,
    field: Field,
    y: np.ndarray,
    h: float,
    stage_points: list | None = None,
) -> np.ndarray:
    """Advance ``y`` by one step of size ``h``; costs exactly ``tableau.stages`` field calls.

    When ``stage_points`` is a list, the evaluation points ``g_i`` are appended
    to it (debug inspection only).
    """
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h!r}")
    a, b = tableau.a, tableau.b
    y = np.asarray(y, dtype=float)
    k = []
    for i in range(tableau.stages):
        g = y
        for j in range(i):
            if a[i, j] != 0.0:
                g = g + (h * a[i, j]) * k[j]
        _check_finite(g, i + 1)
        if stage_points is not None:
            stage_points.append(np.array(g, copy=True))
        k.append(np.asarray(field(g), dtype=float))
    out = y
    for i in range(tableau.stages):
        if b[i] != 0.0:
            out = out + (h * b[i]) * k[i]
    _check_finite(out, tableau.stages)
    return out


def integrate_n(tableau: ButcherTableau, field: Field, y0, h: float, n: int) -> Trajectory:
    """Take ``n`` fixed steps, recording every iterate.

    A divergence stops the loop; the partial trajectory is returned with
    ``error`` set.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    y = np.asarray(y0, dtype=float)
    states = [y]
    error = None
    for step in range(n):
        try:
            y = rk_step(tableau, field, y, h)
        except DivergenceError as exc:
            exc.step = step + 1
            error = exc
            break
        states.append(y)
    m = len(states)
    return Trajectory(
        times=h * np.arange(m, dtype=float),
        states=np.array(states),
        grad_evals=tableau.stages * np.arange(m, dtype=np.int64),
        error=error,
    )


def _solve_fixed(field, y0, t_end, n, tableau):
    h = t_end / n
    y = np.asarray(y0, dtype=float)
    for _ in range(n):
        y = rk_step(tableau, field, y, h)
    return y


def reference_solve(
    field: Field,
    y0,
    t_end: float,
    tol: float = 1e-12,
    initial_steps: int = 8,
    max_halvings: int = 22,
) -> np.ndarray:
    """High-accuracy solution at ``t_end`` by classical RK4 with step halving.

    The step count doubles until two successive answers agree to ``tol`` in
    max-norm; the finer answer is returned.
    """
    if tol < 1e-13:
        raise ValueError("tol below 1e-13 is not attainable in double precision")
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    tab = rk4_classic_tableau()
    n = initial_steps
    prev = None
    for _ in range(max_halvings + 1):
        try:
            cur = _solve_fixed(field, y0, t_end, n, tab)
        except DivergenceError:
            cur = None
        if prev is not None and cur is not None and np.max(np.abs(cur - prev)) < tol:
            return cur
        prev = cur
        n *= 2
    raise OracleError(f"reference solve did not reach tol={tol:g} after {max_halvings} halvings")


def reference_trajectory(field: Field, y0, times, tol: float = 1e-12) -> np.ndarray:
    """Reference states at increasing ``times``, solving segment by segment."""
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0) or times[0] < 0:
        raise ValueError("times must be nonnegative and strictly increasing")
    y, t_prev, out = np.asarray(y0, dtype=float), 0.0, []
    for t in times:
        if t > t_prev:
            y = reference_solve(field, y, t - t_prev, tol=tol)
        out.append(y)
        t_prev = t
    return np.array(out)
