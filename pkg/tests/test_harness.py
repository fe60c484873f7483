import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from hbrk.harness import (
    EXIT_CONFIG,
    EXIT_DIVERGED,
    EXIT_OK,
    EXIT_VERIFY,
    ConfigError,
    ExperimentConfig,
    cmd_compare,
    main,
    parse_lambda_spec,
    read_trace_csv,
)
from hbrk.tableau import serialize_tableau, midpoint_tableau

HEADER = "iter,grad_evals,f_gap,lyapunov,step_size"


def run_cli(*args):
    return main([str(a) for a in args])


def test_run_gd_csv(tmp_path, capsys):
    out = tmp_path / "gd.csv"
    assert run_cli("run", "--optimizer", "gd", "--out", out) == EXIT_OK
    assert "outcome=converged" in capsys.readouterr().out
    lines = out.read_text().splitlines()
    assert lines[0] == HEADER
    rows = read_trace_csv(out)
    gaps = [float(r["f_gap"]) for r in rows]
    assert all(b <= a for a, b in zip(gaps, gaps[1:]))
    assert all(r["lyapunov"] == "" for r in rows)
    assert rows[1]["f_gap"] == "2.6134195976923449"


def test_dd_csv_has_lyapunov_and_exact_floats(tmp_path):
    out = tmp_path / "dd.csv"
    assert run_cli("run", "--order", 2, "--policy", "fixed:0.01", "--budget", 40, "--target", 1e-30, "--out", out) == EXIT_OK
    rows = read_trace_csv(out)
    assert all(r["lyapunov"] for r in rows)
    for r in rows:
        for key in ("f_gap", "lyapunov", "step_size"):
            v = float(r[key])
            assert format(v, ".17g") == r[key]
    assert [int(r["grad_evals"]) for r in rows] == list(range(0, 41, 2))


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_dd_orders_share_schema(tmp_path, order):
    out = tmp_path / f"s{order}.csv"
    run_cli("run", "--order", order, "--policy", "fixed:0.001", "--budget", 24, "--target", 1e-30, "--out", out)
    rows = read_trace_csv(out)
    assert list(rows[0]) == HEADER.split(",")
    assert int(rows[-1]["grad_evals"]) == 24


def test_target_met_at_start(tmp_path):
    out = tmp_path / "one.csv"
    assert run_cli("run", "--optimizer", "nag", "--target", 100, "--out", out) == EXIT_OK
    assert len(read_trace_csv(out)) == 1


def test_run_is_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        run_cli("run", "--objective", "logistic", "--n", 40, "--d", 3, "--optimizer", "dd-s2", "--budget", 400, "--out", p)
    assert a.read_bytes() == b.read_bytes()


def test_divergence_exit_code(capsys):
    assert run_cli("run", "--optimizer", "gd", "--policy", "fixed:5") == EXIT_DIVERGED
    assert "diverged" in capsys.readouterr().out


def test_theorem_auto_reports_constant(capsys):
    assert run_cli("run", "--order", 4, "--policy", "theorem:auto") == EXIT_OK
    assert "c=1 (calibrated" in capsys.readouterr().out


@pytest.mark.parametrize(
    "args",
    [
        ["run", "--budget", "0"],
        ["run", "--lambda-spec", "a,b"],
        ["run", "--lambda-spec", "1,-2"],
        ["run", "--objective", "logistic", "--n", "3"],
        ["run", "--policy", "scan:2:1"],
        ["run", "--policy", "warp:3"],
        ["run", "--optimizer", "adam"],
        ["run", "--tableau-file", "/nonexistent/t.json"],
        ["run", "--optimizer", "gd,nag"],
        ["compare", "--optimizer", "gd,gd"],
        ["compare", "--optimizer", "gd"],
        ["scan", "--policy", "fixed:1"],
        ["check-order"],
        ["verify", "nonsense"],
        ["frobnicate"],
    ],
)
def test_config_errors(args):
    assert main(args) == EXIT_CONFIG


def test_lambda_spec_forms():
    np.testing.assert_array_equal(parse_lambda_spec("1,2.5", 9, 9), [1.0, 2.5])
    assert parse_lambda_spec("logspace:5:100", 50, 500).size == 5
    assert parse_lambda_spec(None, 7, 10)[0] == pytest.approx(0.1)
    with pytest.raises(ConfigError):
        parse_lambda_spec("logspace:x", 5, 5)


def test_compare_quadratic(tmp_path):
    out = tmp_path / "cmp.csv"
    assert run_cli("compare", "--optimizer", "gd,nag,dd-s2,dd-s4", "--out", out) == EXIT_OK
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["optimizer"] + HEADER.split(",")

    def evals(name):
        return max(int(r["grad_evals"]) for r in rows if r["optimizer"] == name)

    assert evals("dd-s4") < evals("dd-s2") < evals("gd")
    assert evals("dd-s4") <= 2 * evals("nag")
    first = {r["optimizer"]: r["f_gap"] for r in rows if r["iter"] == "0"}
    assert len(set(first.values())) == 1


def test_compare_logistic_uses_gamma_for_nag():
    cfg = ExperimentConfig(objective="logistic", n=40, d=3, target=1e-8)
    traces, code = cmd_compare(cfg, ["gd", "nag", "dd-s4"])
    assert code == EXIT_OK
    assert traces["nag"].meta["mu"] == cfg.gamma
    assert traces["gd"].meta["step_size"] == traces["nag"].meta["step_size"]


def test_compare_records_per_run_errors(tmp_path, capsys):
    out = tmp_path / "cmp.csv"
    code = run_cli("compare", "--optimizer", "nag,dd-s4", "--policy", "scan:3:4", "--out", out)
    text = capsys.readouterr().out
    assert code == EXIT_DIVERGED
    assert "dd-s4: error" in text and "nag: outcome=converged" in text
    assert {r["optimizer"] for r in csv.DictReader(open(out))} == {"nag"}


def test_scan_one_dimensional(tmp_path, capsys):
    out = tmp_path / "scan.csv"
    args = ["scan", "--optimizer", "gd", "--lambda-spec", "1", "--policy", "scan:-3:2", "--out", out]
    assert run_cli(*args) == EXIT_OK
    assert "selected z=-1" in capsys.readouterr().out
    run_cli(*args)
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 8 and sum(int(r["selected"]) for r in rows) == 2


def test_scan_step_sizes_on_kappa500(capsys):
    # frozen observation: the scanned DD-s4 step is 0.1 while GD's scan accepts 1
    run_cli("scan", "--optimizer", "gd", "--policy", "scan:-4:2")
    run_cli("scan", "--optimizer", "dd-s4", "--policy", "scan:-4:2")
    text = capsys.readouterr().out
    assert "gd: selected z=0" in text and "dd-s4: selected z=-1" in text


def test_scan_failure_lists_verdicts(capsys):
    assert run_cli("scan", "--optimizer", "gd", "--policy", "scan:2:3") == EXIT_DIVERGED
    text = capsys.readouterr().out
    assert "z=+3" in text and "z=+2" in text and "no stable step size" in text


def test_check_order_file(tmp_path, capsys):
    p = tmp_path / "mid.json"
    p.write_text(serialize_tableau(midpoint_tableau()))
    assert run_cli("check-order", "--tableau-file", p) == EXIT_OK
    text = capsys.readouterr().out
    assert "order 2: pass" in text and "order 3: fail" in text and "[[•]]" in text


def test_check_order_overclaimed(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"stages": 2, "order": 2, "a": [[], [0.1]], "b": [0.5, 0.5]}))
    assert run_cli("check-order", "--tableau-file", p) == EXIT_VERIFY
    assert "violated [•]" in capsys.readouterr().out


def test_check_order_malformed_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"stages": 1}')
    assert run_cli("check-order", "--tableau-file", p) == EXIT_CONFIG


def test_verify_order_suite(capsys):
    assert run_cli("verify", "order") == EXIT_OK
    assert "checks passed" in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "hbrk", "check-order", "--order", "1"], capture_output=True, text=True
    )
    assert proc.returncode == 0 and "order 1: pass" in proc.stdout
