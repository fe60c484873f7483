import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hbrk.errors import DivergenceError, OracleError
from hbrk.integrate import integrate_n, reference_solve, reference_trajectory, rk_step
from hbrk.tableau import builtin_tableaus, euler_tableau, midpoint_tableau, rk4_classic_tableau

TABLEAUS = list(builtin_tableaus().values())


def test_euler_decay_states():
    traj = integrate_n(euler_tableau(), lambda y: -y, np.array([1.0]), 0.5, 2)
    np.testing.assert_array_equal(traj.states[:, 0], [1.0, 0.5, 0.25])
    np.testing.assert_array_equal(traj.times, [0.0, 0.5, 1.0])


def test_zero_field_constant_trajectory():
    traj = integrate_n(rk4_classic_tableau(), np.zeros_like, np.array([2.0, 3.0]), 0.1, 5)
    assert np.all(traj.states == [2.0, 3.0])


@pytest.mark.parametrize("tab", TABLEAUS, ids=lambda t: t.name)
@pytest.mark.parametrize("n", [1, 7])
def test_grad_eval_accounting(tab, n):
    calls = []

    def field(y):
        calls.append(1)
        return -y

    traj = integrate_n(tab, field, np.ones(3), 0.01, n)
    assert len(calls) == n * tab.stages
    assert traj.grad_evals[-1] == n * tab.stages
    assert len(traj.times) == len(traj.states) == len(traj.grad_evals) == n + 1
    assert np.all(np.diff(traj.times) > 0) and np.all(np.diff(traj.grad_evals) >= 0)


def test_stage_points_recorded():
    pts = []
    rk_step(midpoint_tableau(), lambda y: y, np.array([1.0]), 0.2, stage_points=pts)
    np.testing.assert_allclose(np.ravel(pts), [1.0, 1.1])


def test_divergence_returns_partial_trajectory():
    traj = integrate_n(euler_tableau(), lambda y: y**2, np.array([1.0]), 1.0, 50)
    assert isinstance(traj.error, DivergenceError)
    assert traj.error.step is not None and len(traj) == traj.error.step
    assert np.all(np.isfinite(traj.states))


def test_non_positive_step_rejected():
    with pytest.raises(ValueError):
        rk_step(euler_tableau(), lambda y: y, np.ones(1), 0.0)


def test_reference_exponential():
    y = reference_solve(lambda y: -y, np.array([1.0]), 1.0, tol=1e-10)
    assert abs(y[0] - np.exp(-1.0)) < 1e-10


def test_reference_zero_field():
    np.testing.assert_array_equal(reference_solve(np.zeros_like, np.array([4.0]), 3.0), [4.0])


def test_reference_rejects_impossible_tolerance():
    with pytest.raises(ValueError):
        reference_solve(lambda y: -y, np.ones(1), 1.0, tol=1e-15)


def test_reference_failure_is_reported():
    with pytest.raises(OracleError):
        reference_solve(lambda y: y**2, np.ones(1), 2.0, max_halvings=3)


def test_reference_trajectory_matches_oscillator():
    rot = np.array([[0.0, 1.0], [-1.0, 0.0]])
    times = [0.5, 1.0, 3.0]
    out = reference_trajectory(lambda y: rot @ y, np.array([1.0, 0.0]), times, tol=1e-11)
    exact = np.array([[np.cos(t), -np.sin(t)] for t in times])
    np.testing.assert_allclose(out, exact, atol=1e-10)


@given(st.floats(-3, 3), st.floats(0.01, 0.5))
def test_linear_scalar_step_matches_stability_polynomial(lam, h):
    # every 4-stage order-4 explicit method has R(z) = 1 + z + z^2/2 + z^3/6 + z^4/24
    z = lam * h
    out = rk_step(rk4_classic_tableau(), lambda y: lam * y, np.array([1.0]), h)[0]
    assert out == pytest.approx(1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24, rel=1e-13, abs=1e-15)
