"""Shared first-order loops: constant-momentum AGD and backtracking FISTA."""

import numpy as np
import pytest

from psdsos.solvers import agd_strongly_convex, fista_backtracking


def quadratic(rng, m, cond=50.0):
    # 0.5 x'Ax - b'x with controlled spectrum; minimizer A^{-1} b
    Q, _ = np.linalg.qr(rng.standard_normal((m, m)))
    lam = np.linspace(1.0, cond, m)
    A = (Q * lam) @ Q.T
    b = rng.standard_normal(m)
    x_star = np.linalg.solve(A, b)

    def obj(x):
        return float(0.5 * x @ A @ x - b @ x)

    def obj_grad(x):
        return obj(x), A @ x - b

    return obj, obj_grad, x_star, lam[0], lam[-1]


def test_agd_reaches_minimizer():
    rng = np.random.default_rng(0)
    obj, obj_grad, x_star, mu, L = quadratic(rng, 8)
    x, f, info = agd_strongly_convex(obj_grad, np.zeros(8), mu, L, tol=1e-12)
    assert info["converged"]
    np.testing.assert_allclose(x, x_star, atol=1e-5)
    assert f <= obj(x_star) + 1e-9


def test_agd_rejects_bad_constants():
    with pytest.raises(ValueError):
        agd_strongly_convex(lambda x: (0.0, x), np.zeros(2), 0.0, 1.0)
    with pytest.raises(ValueError):
        agd_strongly_convex(lambda x: (0.0, x), np.zeros(2), 2.0, 1.0)


def test_agd_best_value_monotone_in_budget():
    rng = np.random.default_rng(1)
    obj, obj_grad, x_star, mu, L = quadratic(rng, 6, cond=500.0)
    x0 = rng.standard_normal(6)
    prev = np.inf
    for iters in (5, 20, 80, 320):
        _, f, _ = agd_strongly_convex(obj_grad, x0, mu, L, tol=0.0,
                                      max_iters=iters)
        assert f <= prev + 1e-15
        prev = f


def test_agd_respects_gradient_tolerance():
    rng = np.random.default_rng(2)
    obj, obj_grad, x_star, mu, L = quadratic(rng, 5)
    x, f, info = agd_strongly_convex(obj_grad, np.zeros(5), mu, L, tol=1e-9,
                                     max_iters=100_000)
    assert info["converged"]
    assert info["iterations"] < 100_000


def test_fista_matches_direct_solution():
    rng = np.random.default_rng(3)
    obj, obj_grad, x_star, mu, L = quadratic(rng, 8)
    x, f, info = fista_backtracking(obj_grad, obj, np.zeros(8), tol=1e-12,
                                    max_iters=50_000, L0=1e-3)
    assert info["converged"]
    assert info["backtracks"] > 0  # L0 was far too small
    np.testing.assert_allclose(x, x_star, atol=1e-5)


def test_fista_handles_matrix_iterates():
    # iterates may be arrays of any shape; solve min ||X - T||^2 / 2
    rng = np.random.default_rng(4)
    T = rng.standard_normal((3, 2, 2))

    def obj(X):
        return float(0.5 * np.sum((X - T) ** 2))

    def obj_grad(X):
        return obj(X), X - T

    X, f, info = fista_backtracking(obj_grad, obj, np.zeros_like(T), tol=1e-12)
    assert info["converged"]
    np.testing.assert_allclose(X, T, atol=1e-6)


def test_fista_diverging_line_search_raises():
    # objective inconsistent with the reported gradient values: sufficient
    # decrease can never hold, no matter how small the step
    def obj(x):
        return float(0.5 * x @ x) + 10.0

    def obj_grad(x):
        return float(0.5 * x @ x), x

    with pytest.raises(FloatingPointError):
        fista_backtracking(obj_grad, obj, np.ones(3), max_iters=500)


def test_fista_best_value_monotone_in_budget():
    rng = np.random.default_rng(5)
    obj, obj_grad, _, _, _ = quadratic(rng, 6, cond=2000.0)
    x0 = rng.standard_normal(6)
    prev = np.inf
    for iters in (5, 20, 80):
        _, f, _ = fista_backtracking(obj_grad, obj, x0, tol=0.0, max_iters=iters)
        assert f <= prev + 1e-15
        prev = f
