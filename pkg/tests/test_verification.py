import math

import numpy as np
import pytest

from hbrk.verification import (
    CheckResult,
    SUITES,
    check_gradient_gap,
    check_solution_derivatives,
    fd_weights,
    flow_samples,
    run_suite,
    small_logistic,
)


def test_fd_weights_are_exact_on_polynomials():
    offsets = np.arange(-3, 4) * 0.1
    t = offsets
    for q in range(1, 4):
        w = fd_weights(offsets, q)
        # d^q/dt^q of t^q at 0 is q!
        assert w @ t**q == pytest.approx(math.factorial(q), rel=1e-9)
        assert w @ np.ones_like(t) == pytest.approx(0.0, abs=1e-6)


def test_flow_samples_backward_and_forward():
    s = flow_samples(lambda y: -y, np.array([1.0]), [-0.5, 0.0, 0.5], tol=1e-12)
    np.testing.assert_allclose(s[:, 0], np.exp([0.5, 0.0, -0.5]), atol=1e-11)


def test_solution_derivatives_on_logistic():
    assert check_solution_derivatives(small_logistic()).passed


def test_gradient_gap_detects_wrong_L():
    obj = small_logistic()
    assert check_gradient_gap(obj).passed
    assert not check_gradient_gap(obj.with_constants(L=obj.L / 100)).passed


def test_result_line_format():
    line = CheckResult("name", "anchor", False, -0.5, "detail").line()
    assert line.startswith("FAIL  name  [anchor]  margin=-5.000e-01")


def test_suite_names():
    assert SUITES == ("order", "lyapunov", "lemmas", "assumptions")
    with pytest.raises(ValueError):
        run_suite("everything")


@pytest.mark.parametrize("suite", ["lemmas", "assumptions"])
def test_fast_suites_pass(suite):
    assert all(r.passed for r in run_suite(suite))
