"""PSD-valued regression: dual objective/gradient, solver, recovery."""

import numpy as np
import pytest
from scipy.optimize import minimize

from psdsos import datasets, kernels, psdreg, sosmodel
from psdsos.errors import DimensionMismatchError, SymmetryError, ValidationError

GAUSS = kernels.KernelSpec("gaussian", sigma=1.0)


def random_instance(rng, n, d, p=1):
    X = rng.uniform(-1.5, 1.5, size=(n, p))
    A = rng.standard_normal((n, d, d))
    M = 0.5 * (A + np.transpose(A, (0, 2, 1)))
    return psdreg.PsdDataset(X, M)


def sym_basis(d):
    for p in range(d):
        for q in range(p, d):
            E = np.zeros((d, d))
            E[p, q] = E[q, p] = 0.5 if p != q else 1.0
            yield E


# ---------------------------------------------------------------------------
# dataset validation


def test_dataset_rejects_asymmetric_target():
    M = np.array([[[1.0, 0.5], [0.2, 1.0]]])
    with pytest.raises(SymmetryError):
        psdreg.PsdDataset(np.zeros((1, 1)), M)


def test_dataset_rejects_count_mismatch():
    with pytest.raises(DimensionMismatchError):
        psdreg.PsdDataset(np.zeros((2, 1)), np.zeros((3, 2, 2)))
    with pytest.raises(DimensionMismatchError):
        psdreg.PsdDataset(np.zeros((2, 1)), np.zeros((2, 2, 3)))


# ---------------------------------------------------------------------------
# objectives


def test_primal_objective_frozen_values():
    X = np.array([[0.0]])
    fact = sosmodel.factorize(GAUSS, X)
    reg = sosmodel.RegularizerSpec(0.3, 0.7)
    zero = sosmodel.SosModel(fact, 1, np.zeros((1, 1)))
    data0 = psdreg.PsdDataset(X, np.zeros((1, 1, 1)))
    assert psdreg.primal_objective(zero, data0, reg) == 0.0
    # ||M||_F = 2, B = 0, n = 1 -> (1/2) * 4
    data2 = psdreg.PsdDataset(X, np.array([[[2.0]]]))
    assert psdreg.primal_objective(zero, data2, reg) == 2.0


def test_dual_at_zero_gamma():
    # S(0) = lambda1 * I is PSD: no negative part, objective 0, gradient M
    rng = np.random.default_rng(10)
    data = random_instance(rng, 3, 2)
    fact = sosmodel.factorize(GAUSS, data.X)
    reg = sosmodel.RegularizerSpec(0.5, 1e-2)
    val, grad = psdreg.dual_objective_grad(np.zeros((3, 2, 2)), fact.R, data.M, reg)
    assert val == 0.0
    np.testing.assert_allclose(grad, data.M, atol=1e-12)


def test_dual_quadratic_scaling():
    # M = 0, lambda1 = 0: every term is positively 2-homogeneous in Gamma
    rng = np.random.default_rng(11)
    data = random_instance(rng, 4, 2)
    fact = sosmodel.factorize(GAUSS, data.X)
    reg = sosmodel.RegularizerSpec(0.0, 1e-2)
    G = rng.standard_normal((4, 2, 2))
    G = 0.5 * (G + np.transpose(G, (0, 2, 1)))
    M0 = np.zeros_like(G)
    v1, _ = psdreg.dual_objective_grad(G, fact.R, M0, reg)
    v2, _ = psdreg.dual_objective_grad(2.0 * G, fact.R, M0, reg)
    np.testing.assert_allclose(v2, 4.0 * v1, rtol=1e-12)


def test_dual_gradient_matches_finite_differences():
    rng = np.random.default_rng(12)
    h = 1e-6
    for _ in range(6):
        n, d = rng.integers(2, 5), rng.integers(1, 4)
        data = random_instance(rng, n, d)
        fact = sosmodel.factorize(GAUSS, data.X)
        reg = sosmodel.RegularizerSpec(rng.uniform(0, 0.5), 10.0 ** rng.uniform(-4, -1))
        G = rng.standard_normal((n, d, d))
        G = 0.5 * (G + np.transpose(G, (0, 2, 1)))
        _, grad = psdreg.dual_objective_grad(G, fact.R, data.M, reg)
        for i in range(n):
            for E in sym_basis(d):
                Gp, Gm = G.copy(), G.copy()
                Gp[i] += h * E
                Gm[i] -= h * E
                vp, _ = psdreg.dual_objective_grad(Gp, fact.R, data.M, reg)
                vm, _ = psdreg.dual_objective_grad(Gm, fact.R, data.M, reg)
                fd = (vp - vm) / (2.0 * h)
                an = float(np.sum(grad[i] * E))
                assert abs(fd - an) <= 1e-5 * (1.0 + abs(fd)), (n, d, i)


def test_dual_gradient_symmetric_blocks():
    rng = np.random.default_rng(13)
    data = random_instance(rng, 5, 3)
    fact = sosmodel.factorize(GAUSS, data.X)
    G = rng.standard_normal((5, 3, 3))
    G = 0.5 * (G + np.transpose(G, (0, 2, 1)))
    _, grad = psdreg.dual_objective_grad(G, fact.R, data.M,
                                         sosmodel.RegularizerSpec(0.1, 1e-3))
    np.testing.assert_allclose(grad, np.transpose(grad, (0, 2, 1)), atol=1e-12)


# ---------------------------------------------------------------------------
# solver


def test_solve_zero_targets():
    X = np.linspace(0, 1, 4)[:, None]
    data = psdreg.PsdDataset(X, np.zeros((4, 2, 2)))
    model, rep = psdreg.solve(data, GAUSS, sosmodel.RegularizerSpec(0.5, 1e-2))
    assert rep.converged
    assert np.abs(model.B).max() <= 1e-12
    assert abs(rep.gap) <= 1e-12


def test_solve_rejects_lambda2_zero():
    data = psdreg.PsdDataset(np.zeros((1, 1)), np.ones((1, 1, 1)))
    with pytest.raises(ValidationError):
        psdreg.solve(data, GAUSS, sosmodel.RegularizerSpec(1.0, 0.0))


def test_single_point_closed_form():
    # n = d = 1, k(x1,x1) = 1: primal is (b - m)^2/2 + lambda2 b^2/2 over b >= 0,
    # so b* = m/(1+lambda2) and P* = m^2 lambda2 / (2 (1+lambda2))
    data = psdreg.PsdDataset(np.array([[0.3]]), np.array([[[1.0]]]))
    reg = sosmodel.RegularizerSpec(0.0, 0.5)
    model, rep = psdreg.solve(data, GAUSS, reg, tol=1e-12)
    np.testing.assert_allclose(model(np.array([0.3]))[0, 0], 2.0 / 3.0, atol=1e-8)
    np.testing.assert_allclose(rep.primal, 1.0 / 6.0, atol=1e-8)
    # lambda2 -> 0: interpolation
    model, _ = psdreg.solve(data, GAUSS, sosmodel.RegularizerSpec(0.0, 1e-6),
                            tol=1e-12)
    np.testing.assert_allclose(model(np.array([0.3]))[0, 0], 1.0, atol=1e-5)


def test_duality_gap_random_instances():
    rng = np.random.default_rng(14)
    for lam2 in (1e-2, 1e-4):
        for _ in range(3):
            n, d = rng.integers(2, 7), rng.integers(1, 4)
            data = random_instance(rng, n, d, p=2)
            reg = sosmodel.RegularizerSpec(rng.uniform(0, 0.1), lam2)
            model, rep = psdreg.solve(data, GAUSS, reg, tol=1e-9)
            assert rep.converged
            assert abs(rep.gap) <= 1e-6 * (1.0 + abs(rep.primal))
            lam = np.linalg.eigvalsh(model.B)
            assert lam[0] >= -1e-8 * max(lam[-1], 1e-30)


def test_solve_brute_force_oracle():
    # n=2, d=1: primal over PSD 2x2 B via Cholesky parameterization
    data = psdreg.PsdDataset(np.array([[0.0], [0.8]]),
                             np.array([[[1.2]], [[0.4]]]))
    reg = sosmodel.RegularizerSpec(0.05, 1e-2)
    model, rep = psdreg.solve(data, GAUSS, reg, tol=1e-11)
    fact = model.fact

    def primal_of_chol(theta):
        Lo = np.array([[theta[0], 0.0], [theta[1], theta[2]]])
        B = Lo @ Lo.T
        m = sosmodel.SosModel(fact, 1, B)
        return psdreg.primal_objective(m, data, reg)

    best = np.inf
    for start in (np.array([0.5, 0.0, 0.5]), np.array([1.0, -0.5, 0.1]),
                  np.array([0.1, 0.1, 1.0])):
        out = minimize(primal_of_chol, start, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
        best = min(best, out.fun)
    assert abs(rep.primal - best) <= 1e-4 * (1.0 + abs(best))


def test_nonconvergence_reported():
    rng = np.random.default_rng(15)
    data = random_instance(rng, 5, 2)
    _, rep = psdreg.solve(data, GAUSS, sosmodel.RegularizerSpec(0.0, 1e-6),
                          tol=1e-12, max_iters=3)
    assert not rep.converged
    assert rep.iterations == 3


# ---------------------------------------------------------------------------
# lambda2 = 0 checker


def test_feasibility_checker():
    R = np.array([[1.0]])
    M = np.array([[[2.0]]])
    ok = psdreg.feasibility_lambda2_zero(np.zeros((1, 1, 1)), R, M, lambda1=1.0)
    assert ok["feasible"] and ok["objective"] == 0.0
    bad = psdreg.feasibility_lambda2_zero(np.array([[[-5.0]]]), R, M, lambda1=1.0)
    assert not bad["feasible"]
    np.testing.assert_allclose(bad["min_eig"], -4.0)
    np.testing.assert_allclose(bad["objective"], 10.0 - 12.5)


# ---------------------------------------------------------------------------
# geodesic interpolation fidelity (fixed, known-good hyperparameters)


def test_bures_training_error():
    data = datasets.bures_dataset(12)
    spec = kernels.KernelSpec("exponential", sigma=0.1)
    model, rep = psdreg.solve(data, spec, sosmodel.RegularizerSpec(0.0, 1e-6),
                              tol=1e-9)
    assert rep.converged
    F = model.evaluate_batch(data.X)
    scale = max(np.linalg.norm(M) for M in data.M)
    err = max(np.linalg.norm(F[i] - data.M[i]) for i in range(data.n))
    assert err <= 1e-2 * scale
