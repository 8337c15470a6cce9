"""Reference estimators: KRR normal equations and the max-affine QP."""

import numpy as np
import pytest
from scipy.optimize import LinearConstraint, minimize

from psdsos import baselines, kernels
from psdsos.cvxreg import ScalarDataset
from psdsos.errors import DimensionMismatchError

GAUSS = kernels.KernelSpec("gaussian", sigma=1.0)


# ---------------------------------------------------------------------------
# kernel ridge regression


def test_krr_normal_equations():
    rng = np.random.default_rng(60)
    X = rng.uniform(-1, 1, (7, 2))
    y = rng.standard_normal(7)
    data = ScalarDataset(X, y)
    model = baselines.krr_fit(data, GAUSS, rho=0.03)
    # (K + n rho I) alpha = y  <=>  f(X) + n rho alpha = y
    np.testing.assert_allclose(model.predict(X) + 7 * 0.03 * model.alpha, y,
                               atol=1e-10)


def test_krr_interpolates_at_tiny_ridge():
    rng = np.random.default_rng(61)
    X = np.linspace(-1, 1, 5)[:, None]
    y = rng.standard_normal(5)
    model = baselines.krr_fit(ScalarDataset(X, y), GAUSS, rho=1e-12)
    np.testing.assert_allclose(model.predict(X), y, atol=1e-7)


def test_krr_shrinks_at_heavy_ridge():
    X = np.linspace(-1, 1, 5)[:, None]
    y = np.ones(5)
    model = baselines.krr_fit(ScalarDataset(X, y), GAUSS, rho=1e6)
    assert np.abs(model.predict(X)).max() <= 1e-4


# ---------------------------------------------------------------------------
# max-affine convex fit: exact projection oracle in 1-D at n = 3
#
# theta is feasible iff the divided-difference slopes are non-decreasing,
# i.e. a . theta >= 0 with a = (1/h1, -(1/h1 + 1/h2), 1/h2); the objective is
# isotropic, so the solution is the Euclidean projection onto that halfspace.


def _oracle_n3(x, y):
    h1, h2 = x[1] - x[0], x[2] - x[1]
    a = np.array([1.0 / h1, -(1.0 / h1 + 1.0 / h2), 1.0 / h2])
    if a @ y >= 0:
        theta = y.copy()
    else:
        theta = y - (a @ y) / (a @ a) * a
    return theta, float(np.sum((theta - y) ** 2) / 3.0)


def test_pwl_matches_projection_oracle_frozen():
    x = np.array([0.0, 1.0, 2.0])
    y = np.array([0.0, 1.0, 0.0])  # concave bump; projected theta is flat
    model, rep = baselines.pwl_fit(ScalarDataset(x[:, None], y))
    assert rep.converged
    np.testing.assert_allclose(model.theta, [1 / 3, 1 / 3, 1 / 3], atol=1e-4)
    assert rep.objective == pytest.approx(2.0 / 9.0, abs=1e-5)
    assert model.max_violation() <= 1e-5


@pytest.mark.parametrize("seed", range(8))
def test_pwl_matches_projection_oracle_random(seed):
    rng = np.random.default_rng(70 + seed)
    x = np.sort(rng.uniform(-1, 1, 3))
    x[1:] += 0.1 * np.arange(1, 3)  # keep points separated
    y = rng.standard_normal(3)
    theta_star, obj_star = _oracle_n3(x, y)
    model, rep = baselines.pwl_fit(ScalarDataset(x[:, None], y))
    assert abs(rep.objective - obj_star) <= 1e-5 * (1.0 + obj_star)
    np.testing.assert_allclose(model.theta, theta_star, atol=1e-3)


def test_pwl_three_points_2d_interpolates():
    # three affinely independent points admit a single exact affine piece
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    y = np.array([0.3, -0.5, 1.1])
    model, rep = baselines.pwl_fit(ScalarDataset(X, y))
    assert rep.objective <= 1e-8
    np.testing.assert_allclose(model.predict(X), y, atol=1e-4)


def test_pwl_matches_slsqp_reference():
    rng = np.random.default_rng(80)
    x = np.sort(rng.uniform(-2, 2, 8))
    y = x**2 + 0.3 * rng.standard_normal(8)
    # reference: project y onto {consecutive slopes non-decreasing}
    rows = np.zeros((6, 8))
    for i in range(6):
        h1, h2 = x[i + 1] - x[i], x[i + 2] - x[i + 1]
        rows[i, i], rows[i, i + 1], rows[i, i + 2] = (
            1.0 / h1, -(1.0 / h1 + 1.0 / h2), 1.0 / h2)
    ref = minimize(lambda t: np.sum((t - y) ** 2) / 8.0, y,
                   jac=lambda t: 2.0 * (t - y) / 8.0,
                   constraints=[LinearConstraint(rows, 0.0, np.inf)],
                   method="SLSQP", options={"maxiter": 500, "ftol": 1e-14})
    model, rep = baselines.pwl_fit(ScalarDataset(x[:, None], y))
    assert abs(rep.objective - ref.fun) <= 1e-5 * (1.0 + abs(ref.fun))


def test_pwl_feasibility_and_anchor_values():
    rng = np.random.default_rng(81)
    X = rng.uniform(-1, 1, (10, 2))
    y = np.sum(X * X, axis=1) + 0.1 * rng.standard_normal(10)
    model, rep = baselines.pwl_fit(ScalarDataset(X, y))
    assert model.max_violation() <= 1e-5
    np.testing.assert_allclose(model.predict(X), model.theta, atol=1e-5)


def test_pwl_predictor_is_convex():
    rng = np.random.default_rng(82)
    x = np.sort(rng.uniform(-2, 2, 12))
    y = np.abs(x) + 0.05 * rng.standard_normal(12)
    model, _ = baselines.pwl_fit(ScalarDataset(x[:, None], y))
    for _ in range(200):
        a, b = rng.uniform(-2.5, 2.5, 2)
        t = rng.uniform()
        fa, fb, fm = model.predict(np.array([[a], [b], [t * a + (1 - t) * b]]))
        assert fm <= t * fa + (1 - t) * fb + 1e-10


def test_pwl_predict_dimension_mismatch():
    model, _ = baselines.pwl_fit(
        ScalarDataset(np.array([[0.0], [1.0], [2.0]]), np.array([0.0, 1.0, 4.0])))
    with pytest.raises(DimensionMismatchError):
        model.predict(np.zeros((2, 3)))
