import numpy as np
import pytest

from psdsos import psdlinalg
from psdsos.errors import IndefiniteMatrixError, SymmetryError


def test_symmetrize_accepts_roundoff_asymmetry():
    A = np.array([[1.0, 0.5], [0.5 + 1e-13, 2.0]])
    S = psdlinalg.symmetrize(A)
    assert np.array_equal(S, S.T)


def test_symmetrize_rejects_gross_asymmetry():
    with pytest.raises(SymmetryError):
        psdlinalg.symmetrize(np.array([[1.0, 0.5], [0.4, 2.0]]))


def test_positive_negative_parts_hand_example():
    M = np.diag([1.0, -2.0])
    P = psdlinalg.positive_part(M)
    N = psdlinalg.negative_part(M)
    assert np.allclose(P, np.diag([1.0, 0.0]))
    # negative part is returned as a PSD matrix: M = P - N
    assert np.allclose(N, np.diag([0.0, 2.0]))
    assert np.allclose(M, P - N)


def test_parts_split_random_symmetric():
    rng = np.random.default_rng(0)
    for _ in range(25):
        n = int(rng.integers(1, 8))
        A = rng.normal(size=(n, n))
        M = (A + A.T) / 2
        P, N = psdlinalg.positive_part(M), psdlinalg.negative_part(M)
        assert np.allclose(M, P - N, atol=1e-12)
        assert np.linalg.eigvalsh(P)[0] >= -1e-12
        assert np.linalg.eigvalsh(N)[0] >= -1e-12
        # complementary: <P, N> = 0
        assert abs(np.sum(P * N)) <= 1e-10 * max(1.0, np.sum(P * P))


def test_lambda_extremes():
    M = np.diag([3.0, -5.0, 1.0])
    assert psdlinalg.lambda_max(M) == pytest.approx(3.0)
    assert psdlinalg.lambda_min(M) == pytest.approx(-5.0)


def test_chol_upper_hand_example():
    # K = [[4, 2], [2, 5]] has exact upper factor [[2, 1], [0, 2]]
    K = np.array([[4.0, 2.0], [2.0, 5.0]])
    R, tau = psdlinalg.chol_upper_jitter(K)
    assert tau == 0.0
    assert np.allclose(R, [[2.0, 1.0], [0.0, 2.0]])
    assert np.allclose(R.T @ R, K)


def test_chol_jitter_ladder_recovers_singular_gram():
    # duplicated point makes the gram exactly singular
    K = np.ones((3, 3))
    R, tau = psdlinalg.chol_upper_jitter(K)
    assert tau > 0.0
    assert tau in [t * np.trace(K) / 3 for t in psdlinalg.JITTER_LADDER]
    assert np.allclose(R.T @ R, K + tau * np.eye(3), atol=1e-12)


def test_chol_rejects_clearly_indefinite():
    with pytest.raises(IndefiniteMatrixError):
        psdlinalg.chol_upper_jitter(np.diag([1.0, -1.0]))


def test_chol_increasing_rtol_property():
    rng = np.random.default_rng(5)
    for _ in range(10):
        n = int(rng.integers(2, 10))
        A = rng.normal(size=(n, n))
        K = A @ A.T  # PSD, possibly ill-conditioned
        R, tau = psdlinalg.chol_upper_jitter(K)
        assert np.allclose(R.T @ R, K + tau * np.eye(n), atol=1e-10 * np.trace(K))
        assert np.all(np.diag(R) > 0)
