import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hbrk.objectives import (
    LabeledDataset,
    counted,
    gaussian_mixture_data,
    load_dataset,
    logistic,
    logspace_lambdas,
    quadratic,
    save_dataset,
    solve_optimum,
)


def central_gradient(f, x, eps=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = eps
        g[i] = (f(x + e) - f(x - e)) / (2 * eps)
    return g


@pytest.fixture(scope="module")
def small_logistic():
    return logistic(gaussian_mixture_data(10, 3, 2.0, seed=1), 0.1)


def test_quadratic_examples():
    q = quadratic([1.0])
    assert q.value(np.array([2.0])) == 4.0
    np.testing.assert_array_equal(q.gradient(np.array([2.0])), [4.0])
    big = quadratic(logspace_lambdas(50, 500))
    assert big.Q == pytest.approx(500.0, rel=1e-12)
    np.testing.assert_array_equal(big.gradient(np.zeros(50)), 0.0)


def test_logspace_endpoints():
    lam = logspace_lambdas(50, 500)
    assert lam.size == 50 and lam[0] == pytest.approx(1 / 500) and lam[-1] == 1.0
    assert np.all(np.diff(np.log(lam)) == pytest.approx(np.log(500) / 49))


@pytest.mark.parametrize("bad", [[1.0, 0.0], [-1.0], []])
def test_quadratic_rejects_nonpositive(bad):
    with pytest.raises(ValueError):
        quadratic(bad)


@given(st.lists(st.floats(0.01, 10), min_size=1, max_size=6), st.data())
def test_quadratic_gradient_fd(lams, data):
    q = quadratic(lams)
    x = np.array(data.draw(st.lists(st.floats(-3, 3), min_size=len(lams), max_size=len(lams))))
    np.testing.assert_allclose(q.gradient(x), central_gradient(q.value, x), rtol=1e-6, atol=1e-6)


def test_logistic_gradient_fd(small_logistic, rng):
    for _ in range(20):
        w = rng.standard_normal(3)
        g = small_logistic.gradient(w)
        fd = central_gradient(small_logistic.value, w)
        assert np.linalg.norm(g - fd) <= 1e-6 * max(1.0, np.linalg.norm(g))


@pytest.mark.parametrize("m", [1, 2, 3])
def test_logistic_derivative_tensors_fd(small_logistic, m, rng):
    # d/dt of the (m-1)-th tensor along u equals the m-th tensor with u appended
    w = 0.3 * rng.standard_normal(3)
    dirs = [rng.standard_normal(3) for _ in range(m)]
    eps = 1e-5
    lower = (lambda v: small_logistic.gradient(v)) if m == 1 else (
        lambda v: small_logistic.grad_derivative(m - 1, v, dirs[1:])
    )
    fd = (lower(w + eps * dirs[0]) - lower(w - eps * dirs[0])) / (2 * eps)
    exact = small_logistic.grad_derivative(m, w, dirs)
    np.testing.assert_allclose(exact, fd, rtol=1e-6, atol=1e-7)


def test_logistic_at_zero(small_logistic):
    assert small_logistic.value(np.zeros(3)) == pytest.approx(20 * np.log(2.0), rel=1e-15)


def test_logistic_constants(small_logistic):
    assert small_logistic.mu == 0.1
    hess = small_logistic.hessian(small_logistic.x_star)
    eig = np.linalg.eigvalsh(hess)
    assert eig[0] >= 0.1 - 1e-12 and eig[-1] <= small_logistic.L + 1e-12


def test_logistic_optimum_is_stationary(small_logistic):
    assert np.linalg.norm(small_logistic.gradient(small_logistic.x_star)) <= 1e-9 * max(1.0, small_logistic.L)


def test_strong_regularization_shrinks_optimum():
    data = gaussian_mixture_data(5, 2, 1.0, seed=0)
    obj = logistic(data, 1e3)
    bound = data.n_samples * np.max(np.linalg.norm(data.features, axis=1)) / 1e3
    assert np.linalg.norm(obj.x_star) <= bound


def test_symmetric_one_dimensional_logistic():
    data = LabeledDataset(np.array([[2.0], [-2.0]]), np.array([1.0, -1.0]))
    obj = logistic(data, 0.5)
    assert abs(obj.gradient(obj.x_star)[0]) < 1e-12
    # both samples contribute the same margin term, so the optimum solves 2 * 2 * sigmoid(-2w) = 0.5 w
    w = obj.x_star[0]
    assert 4.0 / (1.0 + np.exp(2.0 * w)) == pytest.approx(0.5 * w, abs=1e-12)


def test_solve_optimum_quadratic_and_idempotence():
    q = quadratic([1.0, 3.0])
    x, f = solve_optimum(q, x0=np.ones(2), method="gd")
    assert np.linalg.norm(x) < 1e-11 and f < 1e-20
    obj = logistic(gaussian_mixture_data(5, 2, 1.0, seed=2), 0.2)
    obj_c, counter = counted(obj)
    x2, _ = solve_optimum(obj_c, x0=obj.x_star)
    np.testing.assert_array_equal(x2, obj.x_star)
    assert counter.calls == 1


def test_solve_optimum_methods_agree():
    obj = logistic(gaussian_mixture_data(5, 2, 1.0, seed=2), 0.2)
    x_gd, _ = solve_optimum(obj, method="gd", tol=1e-10)
    np.testing.assert_allclose(x_gd, obj.x_star, atol=1e-8)
    with pytest.raises(ValueError):
        solve_optimum(obj, method="bfgs")


def test_mixture_small_case():
    data = gaussian_mixture_data(1, 1, 10.0, seed=4)
    assert data.labels.tolist() == [1.0, -1.0]
    assert np.sign(data.features[0, 0]) == 1 and np.sign(data.features[1, 0]) == -1


@given(st.integers(1, 30), st.integers(1, 5), st.floats(0.1, 10), st.integers(0, 2**31))
def test_mixture_is_separated_by_first_axis(n, d, margin, seed):
    data = gaussian_mixture_data(n, d, margin, seed)
    assert np.all(data.labels * data.features[:, 0] > 0)
    np.testing.assert_array_equal(data.certificate, np.eye(d)[0])


def test_mixture_deterministic():
    a = gaussian_mixture_data(20, 4, 5.0, seed=42)
    b = gaussian_mixture_data(20, 4, 5.0, seed=42)
    np.testing.assert_array_equal(a.features, b.features)
    assert not np.array_equal(a.features, gaussian_mixture_data(20, 4, 5.0, seed=43).features)


def test_dataset_round_trip(tmp_path):
    data = gaussian_mixture_data(6, 3, 2.0, seed=9)
    p = tmp_path / "data.csv"
    save_dataset(p, data)
    first = p.read_text().splitlines()[0].split(",")
    assert float(first[0]) == data.labels[0]
    back = load_dataset(p)
    np.testing.assert_array_equal(back.features, data.features)
    np.testing.assert_array_equal(back.labels, data.labels)


@pytest.mark.parametrize(
    "X, y, cert",
    [
        (np.ones((2, 1)), [1.0], None),
        (np.ones((1, 1)), [0.0], None),
        (np.array([[np.inf]]), [1.0], None),
        (np.array([[1.0], [2.0]]), [1.0, -1.0], np.ones(1)),
    ],
)
def test_dataset_validation(X, y, cert):
    with pytest.raises(ValueError):
        LabeledDataset(X, np.array(y), cert)
