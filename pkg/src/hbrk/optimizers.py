"""Direct Runge-Kutta discretization of the heavy-ball ODE, plus GD and NAG baselines.

Every optimizer returns a :class:`Trace` with one record per iteration,
starting with iteration 0 at ``x0``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .dynamics import ConditionedProblem, heavy_ball_field, lyapunov
from .errors import DivergenceError, NumericError, ScanFailure
from .integrate import BLOWUP_BOUND, rk_step
from .objectives import Objective
from .tableau import ButcherTableau

__all__ = [
    "TraceRecord",
    "Trace",
    "Fixed",
    "Theorem",
    "Scan",
    "parse_policy",
    "theoretical_step_size",
    "theorem_exponent",
    "direct_discretization",
    "gradient_descent",
    "nag",
    "ScanVerdict",
    "ScanResult",
    "stability_scan",
    "calibrate_theorem_constant",
    "per_step_contraction_ok",
]

log = logging.getLogger(__name__)

CONVERGED = "converged"
BUDGET_EXHAUSTED = "budget_exhausted"
DIVERGED = "diverged"


class TraceRecord(NamedTuple):
    iteration: int
    grad_evals: int
    f_gap: float
    lyapunov: float | None
    step_size: float


@dataclass
class Trace:
    records: list = field(default_factory=list)
    outcome: str = BUDGET_EXHAUSTED
    meta: dict = field(default_factory=dict)
    x_final: np.ndarray | None = None

    def finish(self, outcome, x):
        self.outcome = outcome
        self.x_final = np.array(x, dtype=float, copy=True)
        return self

    def append(self, iteration, grad_evals, f_gap, lyap, step_size):
        self.records.append(TraceRecord(iteration, grad_evals, f_gap, lyap, step_size))

    def __len__(self):
        return len(self.records)

    @property
    def f_gap(self) -> np.ndarray:
        return np.array([r.f_gap for r in self.records])

    @property
    def grad_evals(self) -> np.ndarray:
        return np.array([r.grad_evals for r in self.records], dtype=np.int64)

    @property
    def lyapunov(self) -> np.ndarray:
        return np.array([np.nan if r.lyapunov is None else r.lyapunov for r in self.records])

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]

    def evals_to(self, target: float) -> int | None:
        """Gradient evaluations at the first record with ``f_gap <= target``."""
        for r in self.records:
            if r.f_gap <= target:
                return r.grad_evals
        return None


# -- step policies ----------------------------------------------------------------


@dataclass(frozen=True)
class Fixed:
    h: float

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("fixed step size must be positive")


@dataclass(frozen=True)
class Theorem:
    c: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("theorem constant c must be positive")


@dataclass(frozen=True)
class Scan:
    z_min: int = -6
    z_max: int = 2
    probe_iters: int = 100

    def __post_init__(self):
        if self.z_min > self.z_max:
            raise ValueError(f"empty z range [{self.z_min}, {self.z_max}]")
        if self.probe_iters < 1:
            raise ValueError("probe_iters must be positive")


def parse_policy(text: str):
    """Parse ``fixed:H``, ``theorem:C`` or ``scan:ZMIN:ZMAX``."""
    kind, _, rest = text.partition(":")
    try:
        if kind == "fixed":
            return Fixed(float(rest))
        if kind == "theorem":
            return Theorem(float(rest) if rest else 1.0)
        if kind == "scan":
            zmin, zmax = rest.split(":")
            return Scan(int(zmin), int(zmax))
    except ValueError as exc:
        raise ValueError(f"bad policy {text!r}: {exc}") from exc
    raise ValueError(f"unknown policy {text!r}; expected fixed:H, theorem:C or scan:ZMIN:ZMAX")


def theorem_exponent(s: int) -> float:
    return (s + 3) / (2 * (s + 1))


def theoretical_step_size(E0: float, Q: float, s: int, c: float) -> float:
    """``min(E0^-g, Q^-g) / (2 c^(1/(s+1)))`` with ``g = (s+3)/(2(s+1))``."""
    if not (E0 >= 0 and Q > 0 and s >= 1 and c > 0):
        raise ValueError("need E0 >= 0, Q > 0, c > 0 and s >= 1")
    g = theorem_exponent(s)
    # E0 = 0 means the start is optimal and only the Q term binds
    bound = Q ** (-g) if E0 == 0 else min(E0 ** (-g), Q ** (-g))
    return bound / (2.0 * c ** (1.0 / (s + 1)))


# -- optimizers --------------------------------------------------------------------


def _gap(obj: Objective, x) -> float:
    gap = obj.value(x) - obj.f_star
    if not np.isfinite(gap):
        return float("inf")
    return max(float(gap), 0.0)


def _finite(x) -> bool:
    return bool(np.all(np.isfinite(x)) and np.max(np.abs(x), initial=0.0) <= BLOWUP_BOUND)


def direct_discretization(
    problem: ConditionedProblem,
    x0,
    tableau: ButcherTableau,
    policy=Theorem(1.0),
    budget: int = 100_000,
    target: float = 1e-9,
) -> Trace:
    """Integrate the rescaled heavy-ball field from ``[0; x0]`` with a fixed-step RK method.

    Each iteration is one RK step and costs ``tableau.stages`` gradients.
    """
    if budget < 1:
        raise ValueError("budget must be positive")
    obj = problem.objective
    x0 = np.asarray(x0, dtype=float)
    d = x0.size
    y = np.concatenate([np.zeros(d), x0])
    field = heavy_ball_field(problem)
    S = tableau.stages
    Q, mu, sq = problem.Q, problem.mu, np.sqrt(problem.Q)
    with_lyap = obj.has_optimum

    meta = {"optimizer": "dd", "tableau": tableau.name, "order": tableau.claimed_order, "stages": S}
    if isinstance(policy, Fixed):
        h = policy.h
    elif isinstance(policy, Theorem):
        E0 = lyapunov(y, problem)
        h = theoretical_step_size(E0, Q, tableau.claimed_order, policy.c)
        meta.update(E0=E0, c=policy.c)
    elif isinstance(policy, Scan):
        result = stability_scan(
            lambda hh, iters: direct_discretization(
                problem, x0, tableau, Fixed(hh), budget=iters * S, target=0.0
            ),
            (policy.z_min, policy.z_max),
            policy.probe_iters,
        )
        h = result.h
        meta["scan"] = result
    else:
        raise TypeError(f"unsupported policy {policy!r}")
    meta["step_size"] = h

    def energy(y, gap):
        w, x = y[:d], y[d:]
        r = x + sq * w - obj.x_star
        return float(2.0 * gap / mu + 0.5 * Q * np.dot(w, w) + 0.5 * np.dot(r, r))

    trace = Trace(meta=meta)
    gap = _gap(obj, x0)
    trace.append(0, 0, gap, energy(y, gap) if with_lyap else None, h)
    if gap <= target:
        return trace.finish(CONVERGED, x0)
    k, evals = 0, 0
    while evals + S <= budget:
        try:
            y = rk_step(tableau, field, y, h)
        except (DivergenceError, NumericError):
            trace.append(k + 1, evals + S, float("inf"), None, h)
            return trace.finish(DIVERGED, y[d:])
        k += 1
        evals += S
        gap = _gap(obj, y[d:])
        if not np.isfinite(gap):
            trace.append(k, evals, gap, None, h)
            return trace.finish(DIVERGED, y[d:])
        trace.append(k, evals, gap, energy(y, gap) if with_lyap else None, h)
        if gap <= target:
            return trace.finish(CONVERGED, y[d:])
    return trace.finish(BUDGET_EXHAUSTED, y[d:])


def gradient_descent(
    objective: Objective, x0, h: float | None = None, budget: int = 100_000, target: float = 1e-9
) -> Trace:
    """Plain gradient descent; ``h`` defaults to ``1/L``."""
    h = 1.0 / objective.L if h is None else float(h)
    if not h > 0:
        raise ValueError("step size must be positive")
    x = np.array(x0, dtype=float)
    trace = Trace(meta={"optimizer": "gd", "step_size": h})
    gap = _gap(objective, x)
    trace.append(0, 0, gap, None, h)
    if gap <= target:
        return trace.finish(CONVERGED, x)
    for k in range(1, budget + 1):
        x = x - h * objective.gradient(x)
        gap = _gap(objective, x) if _finite(x) else float("inf")
        trace.append(k, k, gap, None, h)
        if not np.isfinite(gap):
            return trace.finish(DIVERGED, x)
        if gap <= target:
            return trace.finish(CONVERGED, x)
    return trace.finish(BUDGET_EXHAUSTED, x)


def nag(
    objective: Objective,
    x0,
    L: float | None = None,
    mu: float | None = None,
    budget: int = 100_000,
    target: float = 1e-9,
) -> Trace:
    """Nesterov's method with step ``1/L`` and constant momentum ``(sqrt(Q)-1)/(sqrt(Q)+1)``."""
    L = objective.L if L is None else float(L)
    mu = objective.mu if mu is None else float(mu)
    if not (L >= mu > 0):
        raise ValueError(f"need L >= mu > 0, got L={L!r}, mu={mu!r}")
    sq = np.sqrt(L / mu)
    beta = (sq - 1.0) / (sq + 1.0)
    x = np.array(x0, dtype=float)
    z = x.copy()
    trace = Trace(meta={"optimizer": "nag", "step_size": 1.0 / L, "L": L, "mu": mu, "beta": beta})
    gap = _gap(objective, x)
    trace.append(0, 0, gap, None, 1.0 / L)
    if gap <= target:
        return trace.finish(CONVERGED, x)
    for k in range(1, budget + 1):
        x_next = z - objective.gradient(z) / L
        z = x_next + beta * (x_next - x)
        x = x_next
        gap = _gap(objective, x) if _finite(x) and _finite(z) else float("inf")
        trace.append(k, k, gap, None, 1.0 / L)
        if not np.isfinite(gap):
            return trace.finish(DIVERGED, x)
        if gap <= target:
            return trace.finish(CONVERGED, x)
    return trace.finish(BUDGET_EXHAUSTED, x)


# -- step-size scan ----------------------------------------------------------------


class ScanVerdict(NamedTuple):
    z: int
    h: float
    stable: bool
    initial_gap: float
    final_gap: float
    outcome: str


@dataclass(frozen=True)
class ScanResult:
    z: int
    h: float
    verdicts: tuple


def _is_stable(trace: Trace) -> bool:
    gaps = trace.f_gap
    return trace.outcome != DIVERGED and bool(np.all(np.isfinite(gaps)) and gaps[-1] < gaps[0])


def stability_scan(
    run: Callable[[float, int], Trace], z_range: tuple[int, int], probe_iters: int = 100
) -> ScanResult:
    """Largest ``z`` in ``z_range`` for which ``run(10**z, probe_iters)`` is stable.

    Stable means every recorded gap is finite and the last one is strictly
    below the first.  Divergence counts as an unstable verdict, not an error.
    """
    z_min, z_max = z_range
    if z_min > z_max:
        raise ValueError(f"empty z range [{z_min}, {z_max}]")
    verdicts = []
    for z in range(z_max, z_min - 1, -1):
        h = 10.0**z
        try:
            trace = run(h, probe_iters)
            stable = _is_stable(trace)
            v = ScanVerdict(z, h, stable, float(trace.f_gap[0]), float(trace.f_gap[-1]), trace.outcome)
        except (DivergenceError, NumericError, FloatingPointError):
            v = ScanVerdict(z, h, False, float("nan"), float("inf"), DIVERGED)
        verdicts.append(v)
        log.debug("scan z=%d stable=%s", z, v.stable)
        if v.stable:
            return ScanResult(z, h, tuple(verdicts))
    raise ScanFailure(f"no stable step size for z in [{z_min}, {z_max}]", verdicts)


# -- theorem constant calibration ----------------------------------------------------


def per_step_contraction_ok(energies, h: float, rtol: float = 1e-12) -> bool:
    """``E[k+1] <= (1 - h/4) E[k]`` for every consecutive pair (``rtol`` absorbs roundoff)."""
    E = np.asarray(energies, dtype=float)
    return bool(np.all(E[1:] <= (1.0 - h / 4.0) * E[:-1] * (1.0 + rtol)))


def calibrate_theorem_constant(
    problem: ConditionedProblem,
    x0,
    tableau: ButcherTableau,
    target: float = 1e-9,
    max_power: int = 40,
    max_steps: int = 5_000_000,
    rtol: float = 1e-12,
) -> float:
    """Smallest ``c = 2**p`` for which every step of the theorem-policy run contracts.

    Each candidate run stops at the first violated step, at ``f_gap <= target``,
    or after ``max_steps`` steps.
    """
    obj = problem.objective
    x0 = np.asarray(x0, dtype=float)
    d = x0.size
    y0 = np.concatenate([np.zeros(d), x0])
    E0 = lyapunov(y0, problem)
    field = heavy_ball_field(problem)
    for p in range(max_power + 1):
        c = 2.0**p
        h = theoretical_step_size(E0, problem.Q, tableau.claimed_order, c)
        y, E, ok = y0, E0, True
        for _ in range(max_steps):
            try:
                y = rk_step(tableau, field, y, h)
            except (DivergenceError, NumericError):
                ok = False
                break
            E_next = lyapunov(y, problem)
            if not E_next <= (1.0 - h / 4.0) * E * (1.0 + rtol):
                ok = False
                break
            E = E_next
            if obj.value(y[d:]) - obj.f_star <= target:
                break
        else:
            ok = False
        if ok:
            log.info("calibrated c=%g for %s", c, tableau.name)
            return c
    raise RuntimeError(f"no c <= 2**{max_power} satisfies per-step contraction")
