"""Symmetric-matrix utilities: symmetrization, eigenvalue parts, factorization.

Conventions used throughout the package:

* ``negative_part(S)`` returns the PSD matrix N = sum_i max(-lam_i, 0) v_i v_i^T,
  so S = positive_part(S) - negative_part(S).
* Matrices handed in from user data are symmetrized as (M + M^T)/2; asymmetry
  beyond 1e-9 * ||M||_F is an error, not silently repaired.
* Cholesky runs a jitter ladder: the smallest tau in
  {0, 1e-12, 1e-11, ..., 1e-6} * trace(K)/n that factorizes wins.
"""

import numpy as np

from .errors import IndefiniteMatrixError, SymmetryError

SYMMETRY_RTOL = 1e-9

# relative multipliers tried in order; scaled by trace(K)/n
JITTER_LADDER = (0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


def symmetrize(M, rtol: float = SYMMETRY_RTOL) -> np.ndarray:
    """Return (M + M^T)/2; raise if the asymmetry exceeds rtol * ||M||_F."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise SymmetryError(f"expected a square matrix, got shape {M.shape}")
    gap = np.abs(M - M.T).max() if M.size else 0.0
    scale = np.linalg.norm(M)
    if gap > rtol * max(scale, np.finfo(float).tiny):
        raise SymmetryError(
            f"matrix asymmetry {gap:.3e} exceeds {rtol:.1e} * ||M|| = {rtol * scale:.3e}"
        )
    return 0.5 * (M + M.T)


def eigh_parts(S):
    """Eigendecomposition split: (positive part, negative part), both PSD."""
    S = symmetrize(S)
    lam, V = np.linalg.eigh(S)
    pos = (V * np.maximum(lam, 0.0)) @ V.T
    neg = (V * np.maximum(-lam, 0.0)) @ V.T
    return 0.5 * (pos + pos.T), 0.5 * (neg + neg.T)


def positive_part(S) -> np.ndarray:
    return eigh_parts(S)[0]


def negative_part(S) -> np.ndarray:
    """PSD matrix N with S = [S]_+ - N; N = 0 iff S is PSD."""
    return eigh_parts(S)[1]


def lambda_max(S) -> float:
    """Largest eigenvalue (full symmetric decomposition; desk-scale sizes)."""
    return float(np.linalg.eigvalsh(symmetrize(S))[-1])


def lambda_min(S) -> float:
    return float(np.linalg.eigvalsh(symmetrize(S))[0])


def chol_upper_jitter(K):
    """Upper-triangular R with R^T R = K + tau * I for the smallest workable tau.

    tau runs the ladder {0, 1e-12, ..., 1e-6} * trace(K)/n.  Raises
    IndefiniteMatrixError when even the largest jitter fails.
    """
    K = symmetrize(K)
    n = K.shape[0]
    scale = np.trace(K) / max(n, 1)
    for mult in JITTER_LADDER:
        tau = mult * scale
        try:
            L = np.linalg.cholesky(K + tau * np.eye(n))
        except np.linalg.LinAlgError:
            continue
        return L.T.copy(), float(tau)
    raise IndefiniteMatrixError(
        f"matrix is not positive semidefinite: Cholesky failed even with "
        f"jitter {JITTER_LADDER[-1]:.0e} * trace/n = {JITTER_LADDER[-1] * scale:.3e}"
    )
