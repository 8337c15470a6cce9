import numpy as np
import pytest

from psdsos import kernels
from psdsos.errors import DimensionMismatchError, UnsupportedKernelError, ValidationError
from psdsos.kernels import KernelSpec


def fd_d2(spec, x, y, p, q, step=1e-5):
    # central differences in the second argument
    ep = np.zeros_like(y, dtype=float)
    eq = np.zeros_like(y, dtype=float)
    ep[p] = step
    eq[q] = step
    f = lambda yy: kernels.evaluate(spec, x, yy)
    return (
        f(y + ep + eq) - f(y + ep - eq) - f(y - ep + eq) + f(y - ep - eq)
    ) / (4 * step**2)


def fd_d4(spec, x, y, p, q, r, s, step=1e-3):
    # nested stencil: second-order FD in x for each of four y-offsets
    exp_ = np.zeros_like(x, dtype=float)
    exq = np.zeros_like(x, dtype=float)
    exp_[p] = step
    exq[q] = step

    def d2x(xx, yy):
        f = lambda zz: kernels.evaluate(spec, zz, yy)
        return (
            f(xx + exp_ + exq) - f(xx + exp_ - exq)
            - f(xx - exp_ + exq) + f(xx - exp_ - exq)
        ) / (4 * step**2)

    eyr = np.zeros_like(y, dtype=float)
    eys = np.zeros_like(y, dtype=float)
    eyr[r] = step
    eys[s] = step
    return (
        d2x(x, y + eyr + eys) - d2x(x, y + eyr - eys)
        - d2x(x, y - eyr + eys) + d2x(x, y - eyr - eys)
    ) / (4 * step**2)


def test_spec_validation():
    with pytest.raises(ValidationError):
        KernelSpec("gaussian", 0.0)
    with pytest.raises(ValidationError):
        KernelSpec("gaussian", -1.0)
    with pytest.raises(ValidationError):
        KernelSpec("cubic", 1.0)


def test_eval_normalization_and_frozen_values():
    g = KernelSpec("gaussian", 1.0)
    e = KernelSpec("exponential", 1.0)
    assert kernels.evaluate(g, [0.3, -0.7], [0.3, -0.7]) == pytest.approx(1.0)
    assert kernels.evaluate(e, [0.3, -0.7], [0.3, -0.7]) == pytest.approx(1.0)
    # both families give e^{-1} at unit separation with sigma=1
    assert kernels.evaluate(g, [0.0], [1.0]) == pytest.approx(np.exp(-1), abs=1e-12)
    assert kernels.evaluate(e, [0.0], [1.0]) == pytest.approx(np.exp(-1), abs=1e-12)


def test_eval_symmetry_and_dim_mismatch():
    g = KernelSpec("gaussian", 0.7)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x, y = rng.normal(size=3), rng.normal(size=3)
        assert kernels.evaluate(g, x, y) == pytest.approx(kernels.evaluate(g, y, x))
    with pytest.raises(DimensionMismatchError):
        kernels.evaluate(g, [0.0, 1.0], [0.0])


def test_d2_frozen_values():
    g = KernelSpec("gaussian", 1.0)
    x = np.array([0.4, -0.2])
    assert kernels.eval_d2(g, x, x, 0, 0) == pytest.approx(-2.0)
    assert kernels.eval_d2(g, x, x, 0, 1) == pytest.approx(0.0, abs=1e-15)
    # x=0, y=e_1: (-2 + 4) e^{-1}
    v = kernels.eval_d2(g, [0.0, 0.0], [1.0, 0.0], 0, 0)
    assert v == pytest.approx(2 * np.exp(-1), rel=1e-12)


def test_d4_frozen_values():
    assert kernels.eval_d4(KernelSpec("gaussian", 1.0), [0.1], [0.1], 0, 0, 0, 0) \
        == pytest.approx(12.0)
    assert kernels.eval_d4(KernelSpec("gaussian", 2.0), [0.1], [0.1], 0, 0, 0, 0) \
        == pytest.approx(0.75)
    x = np.array([0.3, 0.9])
    assert kernels.eval_d4(KernelSpec("gaussian", 1.0), x, x, 0, 0, 1, 1) \
        == pytest.approx(4.0)


def test_d2_matches_finite_differences():
    rng = np.random.default_rng(42)
    for _ in range(60):
        dim = rng.integers(1, 4)
        sigma = rng.uniform(0.5, 2.0)
        spec = KernelSpec("gaussian", sigma)
        x, y = rng.normal(size=dim), rng.normal(size=dim)
        p, q = rng.integers(0, dim, size=2)
        got = kernels.eval_d2(spec, x, y, p, q)
        want = fd_d2(spec, x, y, p, q)
        assert got == pytest.approx(want, rel=1e-4, abs=1e-7)


def test_d4_matches_finite_differences():
    rng = np.random.default_rng(43)
    for _ in range(40):
        dim = rng.integers(1, 4)
        sigma = rng.uniform(0.7, 1.8)
        spec = KernelSpec("gaussian", sigma)
        x, y = rng.normal(size=dim), rng.normal(size=dim)
        p, q, r, s = rng.integers(0, dim, size=4)
        got = kernels.eval_d4(spec, x, y, p, q, r, s)
        want = fd_d4(spec, x, y, p, q, r, s)
        assert got == pytest.approx(want, rel=1e-4, abs=1e-4)


def test_d2_index_symmetry():
    spec = KernelSpec("gaussian", 1.3)
    rng = np.random.default_rng(7)
    for _ in range(20):
        x, y = rng.normal(size=3), rng.normal(size=3)
        p, q = rng.integers(0, 3, size=2)
        assert kernels.eval_d2(spec, x, y, p, q) == pytest.approx(
            kernels.eval_d2(spec, x, y, q, p))


def test_exponential_derivatives_rejected():
    e = KernelSpec("exponential", 1.0)
    with pytest.raises(UnsupportedKernelError):
        kernels.eval_d2(e, [0.0], [1.0], 0, 0)
    with pytest.raises(UnsupportedKernelError):
        kernels.eval_d4(e, [0.0], [1.0], 0, 0, 0, 0)
    with pytest.raises(UnsupportedKernelError):
        kernels.d2_tensor(e, np.zeros((2, 1)), np.ones((2, 1)))


def test_derivative_index_out_of_range():
    g = KernelSpec("gaussian", 1.0)
    with pytest.raises(ValidationError):
        kernels.eval_d2(g, [0.0, 0.0], [1.0, 0.0], 0, 2)
    with pytest.raises(ValidationError):
        kernels.eval_d4(g, [0.0], [1.0], 0, 0, 0, 1)


def test_gram_frozen_examples():
    g = KernelSpec("gaussian", 1.0)
    assert np.allclose(kernels.gram(g, [[0.5]]), [[1.0]])
    K = kernels.gram(g, [[0.5], [0.5]])
    assert np.allclose(K, 1.0)
    K = kernels.gram(g, [[0.0], [1.0]])
    assert np.allclose(K, [[1.0, np.exp(-1)], [np.exp(-1), 1.0]])


def test_gram_symmetry_and_near_psd():
    rng = np.random.default_rng(11)
    for fam in kernels.FAMILIES:
        for _ in range(10):
            n, dim = int(rng.integers(2, 12)), int(rng.integers(1, 4))
            X = rng.normal(size=(n, dim))
            K = kernels.gram(KernelSpec(fam, rng.uniform(0.3, 2.0)), X)
            assert np.array_equal(K, K.T)
            assert np.allclose(np.diag(K), 1.0)
            assert np.linalg.eigvalsh(K)[0] >= -1e-10 * n


def test_gram_cross():
    g = KernelSpec("gaussian", 1.0)
    X = np.array([[0.0], [1.0]])
    Y = np.array([[0.0], [1.0], [2.0]])
    C = kernels.gram(g, X, Y)
    assert C.shape == (2, 3)
    assert C[0, 0] == pytest.approx(1.0)
    assert C[1, 2] == pytest.approx(np.exp(-1))


def test_d2_tensor_matches_scalar_entries():
    spec = KernelSpec("gaussian", 0.9)
    rng = np.random.default_rng(3)
    X, V = rng.normal(size=(3, 2)), rng.normal(size=(4, 2))
    T = kernels.d2_tensor(spec, X, V)
    assert T.shape == (3, 4, 2, 2)
    for i in (0, 2):
        for j in (1, 3):
            for a in range(2):
                for b in range(2):
                    assert T[i, j, a, b] == pytest.approx(
                        kernels.eval_d2(spec, X[i], V[j], a, b))


def test_d4_tensor_matches_scalar_entries():
    spec = KernelSpec("gaussian", 1.1)
    rng = np.random.default_rng(4)
    V = rng.normal(size=(3, 2))
    T = kernels.d4_tensor(spec, V)
    assert T.shape == (3, 3, 2, 2, 2, 2)
    for i in (0, 2):
        for j in (0, 1):
            for idx in [(0, 0, 0, 0), (0, 1, 1, 0), (1, 1, 0, 0)]:
                assert T[(i, j) + idx] == pytest.approx(
                    kernels.eval_d4(spec, V[i], V[j], *idx))
