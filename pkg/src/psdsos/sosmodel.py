"""Matrix-valued models F_B(x) = Psi(x)^T B Psi(x) built on kernel features.

Given anchor points x_1..x_n with gram matrix K = R^T R (R upper triangular),
the feature block at x is Psi(x) = (R^{-T} v(x)) (x) I_d with
v(x) = (k(x, x_1), ..., k(x, x_n)).  The Kronecker structure is never
materialized in computations: a block is carried as its weight vector
w(x) = R^{-T} v(x) in R^n, and

    F_B(x)[p, q] = sum_{a,b} w_a(x) w_b(x) B[(a,p), (b,q)].

At the anchors themselves w(x_l) is column l of R.  The model value is PSD
for PSD B and linear in B; tr F_B(x) = <Psi Psi^T, B>.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import kernels
from .errors import DimensionMismatchError, IndefiniteMatrixError, ValidationError
from .psdlinalg import chol_upper_jitter, symmetrize

PSD_RTOL = 1e-8  # lambda_min(B) >= -PSD_RTOL * lambda_max(B)


@dataclass(frozen=True)
class GramFactorization:
    """Anchors plus the (jittered) upper Cholesky factor of their gram matrix."""

    kernel: kernels.KernelSpec
    anchors: np.ndarray  # (n, p)
    R: np.ndarray  # (n, n) upper triangular, R^T R = K + tau I
    tau: float

    @property
    def n(self) -> int:
        return self.anchors.shape[0]


def factorize(spec: kernels.KernelSpec, anchors) -> GramFactorization:
    anchors = kernels._as_points(anchors)
    K = kernels.gram(spec, anchors)
    R, tau = chol_upper_jitter(K)
    return GramFactorization(spec, anchors, R, tau)


def feature_weights(fact: GramFactorization, X) -> np.ndarray:
    """Weight vectors w(x) = R^{-T} v(x) for query points, as columns (n, m)."""
    X = kernels._as_points(X)
    V = kernels.gram(fact.kernel, fact.anchors, X)  # (n, m)
    return solve_triangular(fact.R, V, trans="T", lower=False)


def anchor_weights(fact: GramFactorization) -> np.ndarray:
    """Weights at the anchors themselves: R^{-T} K = R, column l per anchor.

    Exact only for tau = 0; with jitter the columns of R correspond to the
    inflated gram matrix, which is the consistent choice inside the solvers.
    """
    return fact.R


@dataclass(frozen=True)
class FeatureBlock:
    """Psi(x) = w (x) I_d, carried as the weight vector w."""

    w: np.ndarray  # (n,)
    d: int

    def dense(self) -> np.ndarray:
        """Materialized (n*d, d) block, for tests and small-scale checks."""
        return np.kron(self.w[:, None], np.eye(self.d))


def features_at(fact: GramFactorization, x, d: int) -> FeatureBlock:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w = feature_weights(fact, x[None, :])
    return FeatureBlock(w[:, 0], d)


@dataclass(frozen=True)
class RegularizerSpec:
    """Omega(B) = lambda1 * tr B + (lambda2 / 2) * ||B||_F^2."""

    lambda1: float = 0.0
    lambda2: float = 0.0

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValidationError(
                f"regularization weights must be nonnegative, got "
                f"({self.lambda1}, {self.lambda2})"
            )


def omega(B, reg: RegularizerSpec) -> float:
    B = np.asarray(B, dtype=float)
    return float(reg.lambda1 * np.trace(B) + 0.5 * reg.lambda2 * np.sum(B * B))


@dataclass
class SosModel:
    """A PSD-matrix-valued function F_B(x) = Psi(x)^T B Psi(x).

    B is (n*d, n*d) and PSD up to round-off; blocks are indexed so that
    B.reshape(n, d, n, d)[a, :, b, :] couples anchors a and b.
    """

    fact: GramFactorization
    d: int
    B: np.ndarray  # (n*d, n*d)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.fact.n
        self.B = symmetrize(np.asarray(self.B, dtype=float))
        if self.B.shape != (n * self.d, n * self.d):
            raise DimensionMismatchError(
                f"B has shape {self.B.shape}, expected {(n * self.d, n * self.d)}"
            )
        lam = np.linalg.eigvalsh(self.B)
        if lam[0] < -PSD_RTOL * max(lam[-1], 0.0) and lam[0] < 0:
            raise IndefiniteMatrixError(
                f"B is not PSD: lambda_min = {lam[0]:.3e}, lambda_max = {lam[-1]:.3e}"
            )

    @property
    def kernel(self) -> kernels.KernelSpec:
        return self.fact.kernel

    @property
    def anchors(self) -> np.ndarray:
        return self.fact.anchors

    def _B4(self) -> np.ndarray:
        n = self.fact.n
        return self.B.reshape(n, self.d, n, self.d)

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.evaluate_batch(x[None, :])[0]

    def evaluate_batch(self, X) -> np.ndarray:
        """F_B at each row of X, returned as (m, d, d); symmetric by construction."""
        W = feature_weights(self.fact, X)  # (n, m)
        F = np.einsum("am,apbq,bm->mpq", W, self._B4(), W, optimize=True)
        return 0.5 * (F + np.transpose(F, (0, 2, 1)))

    def trace_at(self, X) -> np.ndarray:
        """tr F_B(x) = <Psi Psi^T, B> per query point."""
        return np.trace(self.evaluate_batch(X), axis1=1, axis2=2)
