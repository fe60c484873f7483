"""Experiment orchestration behind the ``hbrk`` command line.

Exit codes: 0 success, 1 configuration error, 2 run divergence,
3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import ConditionedProblem
from .errors import ScanFailure
from .objectives import Objective, gaussian_mixture_data, logistic, logspace_lambdas, quadratic
from .optimizers import (
    DIVERGED,
    Fixed,
    Scan,
    Theorem,
    Trace,
    calibrate_theorem_constant,
    direct_discretization,
    gradient_descent,
    nag,
    parse_policy,
    stability_scan,
)
from .order_conditions import check_order
from .tableau import ButcherTableau, TableauError, load_tableau, tableau_for_order
from .verification import SUITES, run_suite

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_VERIFY = 0, 1, 2, 3

TRACE_HEADER = ["iter", "grad_evals", "f_gap", "lyapunov", "step_size"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    objective: str = "quadratic"
    kappa: float = 500.0
    lambda_spec: str | None = None
    n: int = 200
    d: int | None = None
    margin: float = 5.0
    gamma: float = 1e-2
    seed: int = 42
    optimizer: str = "dd"
    tableau_file: str | None = None
    order: int = 4
    policy: str | None = None
    budget: int = 200_000
    target: float = 1e-9
    probe_iters: int = 100
    out: str | None = None

    def validate(self) -> "ExperimentConfig":
        if self.objective not in ("quadratic", "logistic"):
            raise ConfigError(f"objective: expected 'quadratic' or 'logistic', got {self.objective!r}")
        if not self.budget > 0:
            raise ConfigError("budget: must be positive")
        if not self.target > 0:
            raise ConfigError("target: must be positive")
        if self.kappa < 1:
            raise ConfigError("kappa: must be >= 1")
        if self.objective == "logistic" and (self.n < 2 or self.n % 2):
            raise ConfigError("n: must be a positive even number (two equal classes)")
        if self.d is not None and self.d < 1:
            raise ConfigError("d: must be positive")
        if self.probe_iters < 1:
            raise ConfigError("probe_iters: must be positive")
        resolve_policy(self.policy)
        return self


def resolve_policy(text: str | None):
    """Parse ``--policy``; ``theorem:auto`` yields ``Theorem(1.0)`` and is calibrated at run time."""
    if text is None:
        return None
    try:
        return Theorem(1.0) if text.strip() == "theorem:auto" else parse_policy(text)
    except ValueError as exc:
        raise ConfigError(f"policy: {exc}") from exc


# -- construction ------------------------------------------------------------------


def parse_lambda_spec(text: str | None, d: int, kappa: float) -> np.ndarray:
    """``None``/``logspace`` -> d values log-spaced in [1/kappa, 1]; ``logspace:D:K``; or a comma list."""
    if text is None or text == "logspace":
        return logspace_lambdas(d, kappa)
    if text.startswith("logspace:"):
        try:
            _, dd, kk = text.split(":")
            return logspace_lambdas(int(dd), float(kk))
        except ValueError as exc:
            raise ConfigError(f"lambda_spec: bad logspace form {text!r}") from exc
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise ConfigError(f"lambda_spec: expected comma-separated numbers, got {text!r}") from exc


def build_objective(cfg: ExperimentConfig) -> Objective:
    if cfg.objective == "quadratic":
        lam = parse_lambda_spec(cfg.lambda_spec, cfg.d or 50, cfg.kappa)
        try:
            return quadratic(lam)
        except ValueError as exc:
            raise ConfigError(f"lambda_spec: {exc}") from exc
    data = gaussian_mixture_data(cfg.n // 2, cfg.d or 20, cfg.margin, cfg.seed)
    return logistic(data, cfg.gamma)


def initial_point(objective: Objective) -> np.ndarray:
    return np.ones(objective.dim)


def resolve_tableau(cfg: ExperimentConfig, order: int | None = None) -> ButcherTableau:
    try:
        if cfg.tableau_file and order is None:
            return load_tableau(cfg.tableau_file)
        return tableau_for_order(cfg.order if order is None else order)
    except (TableauError, OSError) as exc:
        raise ConfigError(f"tableau: {exc}") from exc


def _dd_order(name: str) -> int | None:
    if name == "dd":
        return None
    if name.startswith("dd-s") and name[4:].isdigit():
        return int(name[4:])
    raise ConfigError(f"optimizer: unknown name {name!r}; use gd, nag, dd or dd-sK")


# -- running optimizers ------------------------------------------------------------


def scan_baseline_L(objective: Objective, x0, cfg: ExperimentConfig, z_range=(-6, 3)):
    """Smallest ``L = 10**-z`` stable for both GD (step 1/L) and NAG (mu fixed)."""
    z_max_nag = min(z_range[1], math.floor(-math.log10(objective.mu)))
    gd_scan = stability_scan(
        lambda h, it: gradient_descent(objective, x0, h=h, budget=it, target=0.0), z_range, cfg.probe_iters
    )
    nag_scan = stability_scan(
        lambda h, it: nag(objective, x0, L=1.0 / h, budget=it, target=0.0),
        (z_range[0], z_max_nag),
        cfg.probe_iters,
    )
    return max(1.0 / gd_scan.h, 1.0 / nag_scan.h), gd_scan, nag_scan


def run_named(name: str, objective: Objective, x0, cfg: ExperimentConfig, baseline_L: float | None = None) -> Trace:
    """Run one optimizer by name.  ``baseline_L`` overrides L for GD, NAG and the DD problem."""
    policy = resolve_policy(cfg.policy)
    L = objective.L if baseline_L is None else max(baseline_L, objective.mu)
    if name == "gd":
        if isinstance(policy, Fixed):
            h = policy.h
        elif isinstance(policy, Scan):
            h = stability_scan(
                lambda hh, it: gradient_descent(objective, x0, h=hh, budget=it, target=0.0),
                (policy.z_min, policy.z_max),
                cfg.probe_iters,
            ).h
        else:
            h = 1.0 / L
        return gradient_descent(objective, x0, h=h, budget=cfg.budget, target=cfg.target)
    if name == "nag":
        if isinstance(policy, Fixed):
            L = max(1.0 / policy.h, objective.mu)
        return nag(objective, x0, L=L, mu=objective.mu, budget=cfg.budget, target=cfg.target)

    tableau = resolve_tableau(cfg, _dd_order(name))
    problem = ConditionedProblem(objective, objective.mu, L)
    if policy is None:
        policy = Scan(probe_iters=cfg.probe_iters)
    elif isinstance(policy, Scan):
        policy = replace(policy, probe_iters=cfg.probe_iters)
    calibrated = None
    if isinstance(policy, Theorem) and cfg.policy.strip() == "theorem:auto":
        calibrated = calibrate_theorem_constant(problem, x0, tableau, target=cfg.target)
        policy = Theorem(calibrated)
    trace = direct_discretization(problem, x0, tableau, policy, budget=cfg.budget, target=cfg.target)
    if calibrated is not None:
        trace.meta["c_calibrated"] = calibrated
    return trace


# -- CSV ---------------------------------------------------------------------------


def fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def trace_rows(trace: Trace):
    for r in trace.records:
        yield [fmt(r.iteration), fmt(r.grad_evals), fmt(r.f_gap), fmt(r.lyapunov), fmt(r.step_size)]


def write_trace_csv(path, trace: Trace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        w.writerows(trace_rows(trace))


def write_compare_csv(path, traces: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["optimizer"] + TRACE_HEADER)
        for name, trace in traces.items():
            for row in trace_rows(trace):
                w.writerow([name] + row)


def read_trace_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def summary(name: str, trace: Trace) -> str:
    r = trace.final
    line = f"{name}: outcome={trace.outcome} f_gap={r.f_gap:.6e} grad_evals={r.grad_evals} iters={r.iteration} h={r.step_size:.6g}"
    if "c_calibrated" in trace.meta:
        line += f" c={trace.meta['c_calibrated']:g} (calibrated, not a closed-form constant)"
    elif "c" in trace.meta:
        line += f" c={trace.meta['c']:g} (user-supplied constant)"
    return line


# -- commands ------------------------------------------------------------------------


def cmd_run(cfg: ExperimentConfig, stream=None) -> tuple[Trace, int]:
    stream = stream or sys.stdout
    cfg.validate()
    objective = build_objective(cfg)
    x0 = initial_point(objective)
    names = cfg.optimizer.split(",")
    if len(names) != 1:
        raise ConfigError("optimizer: run takes exactly one optimizer; use compare for several")
    trace = run_named(names[0], objective, x0, cfg)
    if cfg.out:
        write_trace_csv(cfg.out, trace)
    print(summary(names[0], trace), file=stream)
    return trace, EXIT_DIVERGED if trace.outcome == DIVERGED else EXIT_OK


def cmd_compare(cfg: ExperimentConfig, names: list[str], stream=None) -> tuple[dict, int]:
    """Run several optimizers on one objective and one ``x0``.

    Quadratic: GD uses ``1/L`` and NAG the analytic ``L, mu``.  Logistic: ``L``
    is scanned as the smallest power of ten stable for both GD and NAG, with
    ``mu = gamma``.  DD step sizes are scanned unless ``--policy`` says otherwise.
    """
    stream = stream or sys.stdout
    cfg.validate()
    if len(names) < 2:
        raise ConfigError("optimizer: compare needs at least two optimizers")
    if len(set(names)) != len(names):
        raise ConfigError(f"optimizer: duplicate names in {names}")
    for name in names:
        if name not in ("gd", "nag"):
            _dd_order(name)
    objective = build_objective(cfg)
    x0 = initial_point(objective)
    baseline_L = None
    if cfg.objective == "logistic":
        baseline_L, gd_scan, nag_scan = scan_baseline_L(objective, x0, cfg)
        print(
            f"scanned L={baseline_L:g} (gd z={gd_scan.z}, nag z={nag_scan.z}), mu={objective.mu:g}",
            file=stream,
        )
    traces, errors = {}, {}
    for name in names:
        try:
            traces[name] = run_named(name, objective, x0, cfg, baseline_L=baseline_L)
        except (ScanFailure, ArithmeticError, RuntimeError) as exc:
            errors[name] = exc
            print(f"{name}: error {exc}", file=stream)
            continue
        print(summary(name, traces[name]), file=stream)
    if cfg.out:
        write_compare_csv(cfg.out, traces)
    bad = errors or any(t.outcome == DIVERGED for t in traces.values())
    return traces, EXIT_DIVERGED if bad else EXIT_OK


def cmd_scan(cfg: ExperimentConfig, stream=None):
    stream = stream or sys.stdout
    cfg.validate()
    policy = resolve_policy(cfg.policy) or Scan()
    if not isinstance(policy, Scan):
        raise ConfigError("policy: scan needs --policy scan:ZMIN:ZMAX")
    objective = build_objective(cfg)
    x0 = initial_point(objective)
    name = cfg.optimizer
    z_range = (policy.z_min, policy.z_max)
    if name == "gd":
        run = lambda h, it: gradient_descent(objective, x0, h=h, budget=it, target=0.0)  # noqa: E731
    elif name == "nag":
        z_range = (policy.z_min, min(policy.z_max, math.floor(-math.log10(objective.mu))))
        if z_range[0] > z_range[1]:
            raise ConfigError("policy: z range leaves no L >= mu for nag")
        run = lambda h, it: nag(objective, x0, L=1.0 / h, budget=it, target=0.0)  # noqa: E731
    else:
        tableau = resolve_tableau(cfg, _dd_order(name))
        problem = ConditionedProblem.from_objective(objective)
        run = lambda h, it: direct_discretization(  # noqa: E731
            problem, x0, tableau, Fixed(h), budget=it * tableau.stages, target=0.0
        )
    try:
        result = stability_scan(run, z_range, cfg.probe_iters)
        verdicts, code = result.verdicts, EXIT_OK
    except ScanFailure as exc:
        result, verdicts, code = None, exc.verdicts, EXIT_DIVERGED
    for v in verdicts:
        print(
            f"z={v.z:+d} h={v.h:g} {'stable' if v.stable else 'unstable'} "
            f"gap {v.initial_gap:.3e} -> {v.final_gap:.3e} ({v.outcome})",
            file=stream,
        )
    if result is None:
        print(f"{name}: no stable step size in [{z_range[0]}, {z_range[1]}]", file=stream)
    else:
        print(f"{name}: selected z={result.z} h={result.h:g}", file=stream)
    if cfg.out:
        with open(cfg.out, "a", newline="") as fh:
            w = csv.writer(fh)
            if fh.tell() == 0:
                w.writerow(["optimizer", "z", "step_size", "stable", "initial_gap", "final_gap", "outcome", "selected"])
            for v in verdicts:
                w.writerow(
                    [name, v.z, fmt(v.h), int(v.stable), fmt(v.initial_gap), fmt(v.final_gap), v.outcome,
                     int(result is not None and v.z == result.z)]
                )
    return result, code


def cmd_check_order(tableau: ButcherTableau, max_order: int | None = None, stream=None) -> int:
    stream = stream or sys.stdout
    top = tableau.claimed_order + 1 if max_order is None else max_order
    passed_claim = True
    for s in range(1, top + 1):
        report = check_order(tableau, s)
        new = [v for v in report.violations if v[0].order == s]
        print(f"order {s}: {'pass' if report.ok else 'fail'}", file=stream)
        for tree, phi, target in new:
            print(f"  violated {tree}: weight={phi:.17g} expected={target:.17g}", file=stream)
        if s <= tableau.claimed_order and not report.ok:
            passed_claim = False
    print(f"{tableau.name}: claimed order {tableau.claimed_order} {'certified' if passed_claim else 'NOT certified'}",
          file=stream)
    return EXIT_OK if passed_claim else EXIT_VERIFY


def cmd_verify(suite: str, stream=None) -> int:
    stream = stream or sys.stdout
    if suite not in SUITES + ("all",):
        raise ConfigError(f"suite: unknown {suite!r}; choose from {', '.join(SUITES + ('all',))}")
    results = run_suite(suite)
    for r in results:
        print(r.line(), file=stream)
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed", file=stream)
    return EXIT_VERIFY if failed else EXIT_OK


# -- argument parsing ------------------------------------------------------------------


def _common(parser: argparse.ArgumentParser):
    g = parser.add_argument_group("problem")
    g.add_argument("--objective", default="quadratic", choices=["quadratic", "logistic"])
    g.add_argument("--kappa", type=float, default=500.0)
    g.add_argument("--lambda-spec", default=None, help="logspace | logspace:D:KAPPA | comma list")
    g.add_argument("--n", type=int, default=200, help="logistic sample count (both classes)")
    g.add_argument("--d", type=int, default=None, help="dimension (default 50 quadratic, 20 logistic)")
    g.add_argument("--margin", type=float, default=5.0)
    g.add_argument("--gamma", type=float, default=1e-2)
    g.add_argument("--seed", type=int, default=42)
    g = parser.add_argument_group("optimizer")
    g.add_argument("--optimizer", default="dd", help="gd | nag | dd | dd-sK; comma list for compare")
    g.add_argument("--tableau-file", default=None)
    g.add_argument("--order", type=int, default=4)
    g.add_argument("--policy", default=None, help="fixed:H | theorem:C | theorem:auto | scan:ZMIN:ZMAX")
    g.add_argument("--probe-iters", type=int, default=100)
    g.add_argument("--budget", type=int, default=200_000, help="max gradient evaluations")
    g.add_argument("--target", type=float, default=1e-9, help="stop when f - f* <= target")
    g.add_argument("--out", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hbrk", description="Heavy-ball Runge-Kutta optimizers")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("run", "run one optimizer and write its trace"),
        ("compare", "run several optimizers on a shared problem"),
        ("scan", "report the step-size stability scan"),
    ):
        _common(sub.add_parser(name, help=help_))
    p = sub.add_parser("check-order", help="certify a tableau's order algebraically")
    p.add_argument("--tableau-file", default=None)
    p.add_argument("--order", type=int, default=None, help="built-in tableau of this order")
    p.add_argument("--max-order", type=int, default=None)
    p = sub.add_parser("verify", help="run a property suite")
    p.add_argument("suite", help=", ".join(SUITES + ("all",)))
    return parser


def config_from_args(args) -> ExperimentConfig:
    return ExperimentConfig(
        objective=args.objective,
        kappa=args.kappa,
        lambda_spec=args.lambda_spec,
        n=args.n,
        d=args.d,
        margin=args.margin,
        gamma=args.gamma,
        seed=args.seed,
        optimizer=args.optimizer,
        tableau_file=args.tableau_file,
        order=args.order,
        policy=args.policy,
        budget=args.budget,
        target=args.target,
        probe_iters=args.probe_iters,
        out=args.out,
    )


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            return cmd_run(config_from_args(args))[1]
        if args.command == "compare":
            cfg = config_from_args(args)
            return cmd_compare(cfg, cfg.optimizer.split(","))[1]
        if args.command == "scan":
            return cmd_scan(config_from_args(args))[1]
        if args.command == "check-order":
            if (args.tableau_file is None) == (args.order is None):
                raise ConfigError("check-order needs exactly one of --tableau-file or --order")
            try:
                tab = load_tableau(args.tableau_file) if args.tableau_file else tableau_for_order(args.order)
            except (TableauError, OSError) as exc:
                raise ConfigError(f"tableau: {exc}") from exc
            return cmd_check_order(tab, args.max_order)
        if args.command == "verify":
            return cmd_verify(args.suite)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG
