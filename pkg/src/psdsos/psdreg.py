"""PSD-matrix-valued regression by a dual accelerated gradient method.

Primal problem over B in the PSD cone (features Psi_i at the n inputs):

    min_{B >= 0}  (1/2n) sum_i ||Psi_i^T B Psi_i - M_i||_F^2
                  + lambda1 tr B + (lambda2/2) ||B||_F^2

Its Fenchel dual is an unconstrained smooth problem over symmetric d x d
blocks Gamma = (Gamma^(1), ..., Gamma^(n)):

    min_Gamma  D(Gamma) = sum_i <Gamma^(i), M_i>
                          + (n/2) sum_i ||Gamma^(i)||_F^2
                          + (1/(2 lambda2)) || [S(Gamma)]_- ||_F^2,
    S(Gamma) = sum_i Psi_i Gamma^(i) Psi_i^T + lambda1 I,

with optimal value  P* = -min D.  D is n-strongly convex with smoothness
constant L = n + lambda_max(K o K)/lambda2 (o = elementwise product), so the
constant-momentum accelerated method applies.  The optimal primal matrix is
recovered as B* = (1/lambda2) [S(Gamma*)]_-  (PSD by construction), and at the
optimum Psi_i^T B* Psi_i = M_i + n Gamma*^(i).

Since Psi_i = w_i (x) I_d with w_i the i-th column of the gram factor R, the
block sums reduce to einsum contractions and never materialize Kronecker
products:  S[a,:,b,:] = sum_i R[a,i] R[b,i] Gamma^(i).
"""

import time
from dataclasses import dataclass

import numpy as np

from . import kernels, sosmodel
from .errors import DimensionMismatchError, SymmetryError, ValidationError
from .psdlinalg import SYMMETRY_RTOL
from .solvers import SolveReport, agd_strongly_convex


@dataclass(frozen=True)
class PsdDataset:
    """Inputs X (n, p) with symmetric matrix targets M (n, d, d)."""

    X: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "X", kernels._as_points(self.X))
        M = np.asarray(self.M, dtype=float)
        if M.ndim != 3 or M.shape[1] != M.shape[2]:
            raise DimensionMismatchError(
                f"targets must have shape (n, d, d), got {M.shape}"
            )
        if M.shape[0] != self.X.shape[0]:
            raise DimensionMismatchError(
                f"{self.X.shape[0]} inputs but {M.shape[0]} targets"
            )
        for i, Mi in enumerate(M):
            gap = np.abs(Mi - Mi.T).max()
            if gap > SYMMETRY_RTOL * max(np.linalg.norm(Mi), np.finfo(float).tiny):
                raise SymmetryError(f"target matrix in row {i} is asymmetric ({gap:.3e})")
        object.__setattr__(self, "M", 0.5 * (M + np.transpose(M, (0, 2, 1))))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.M.shape[1]


def _split_negative(S):
    """PSD negative part of S and its squared Frobenius norm."""
    lam, V = np.linalg.eigh(0.5 * (S + S.T))
    neg = np.minimum(lam, 0.0)
    N = (V * (-neg)) @ V.T
    return N, float(np.sum(neg * neg))


def dual_objective_grad(gamma, R, M, reg: sosmodel.RegularizerSpec):
    """Value and gradient of D at Gamma (gamma has shape (n, d, d))."""
    n, d, _ = gamma.shape
    S = np.einsum("ai,bi,ipq->apbq", R, R, gamma, optimize=True).reshape(n * d, n * d)
    S.flat[:: n * d + 1] += reg.lambda1
    N, neg_sq = _split_negative(S)
    val = (
        float(np.einsum("ipq,ipq->", gamma, M))
        + 0.5 * n * float(np.sum(gamma * gamma))
        + neg_sq / (2.0 * reg.lambda2)
    )
    N4 = N.reshape(n, d, n, d)
    grad = M + n * gamma - np.einsum("ai,bi,apbq->ipq", R, R, N4, optimize=True) / reg.lambda2
    return val, grad


def primal_objective(model: sosmodel.SosModel, data: PsdDataset,
                     reg: sosmodel.RegularizerSpec) -> float:
    """(1/2n) sum ||F_B(x_i) - M_i||_F^2 + Omega(B)."""
    F = model.evaluate_batch(data.X)
    resid = F - data.M
    return float(np.sum(resid * resid) / (2.0 * data.n) + sosmodel.omega(model.B, reg))


def feasibility_lambda2_zero(gamma, R, M, lambda1: float, tol: float = 1e-8) -> dict:
    """Objective/feasibility check for the lambda2 = 0 dual (no solver branch).

    With lambda2 = 0 the quadratic penalty becomes the constraint
    S(Gamma) >= 0; feasible Gamma are scored by the negated loss conjugate
    -sum <Gamma^(i), M_i> - (n/2) sum ||Gamma^(i)||_F^2 (to be maximized).
    """
    gamma = np.asarray(gamma, dtype=float)
    M = np.asarray(M, dtype=float)
    n, d, _ = gamma.shape
    S = np.einsum("ai,bi,ipq->apbq", R, R, gamma, optimize=True).reshape(n * d, n * d)
    S.flat[:: n * d + 1] += lambda1
    lam_min = float(np.linalg.eigvalsh(0.5 * (S + S.T))[0])
    scale = max(abs(lambda1), float(np.abs(S).max()), 1.0)
    return {
        "min_eig": lam_min,
        "feasible": lam_min >= -tol * scale,
        "objective": -float(np.einsum("ipq,ipq->", gamma, M))
        - 0.5 * n * float(np.sum(gamma * gamma)),
    }


def solve(
    data: PsdDataset,
    spec: kernels.KernelSpec,
    reg: sosmodel.RegularizerSpec,
    tol: float = 1e-10,
    max_iters: int = 50_000,
):
    """Fit F_B to the dataset; returns (SosModel, SolveReport)."""
    if reg.lambda2 <= 0:
        raise ValidationError(
            "the dual solver requires lambda2 > 0; the lambda2 = 0 problem is "
            "available only through feasibility_lambda2_zero"
        )
    t0 = time.perf_counter()
    n, d = data.n, data.d
    fact = sosmodel.factorize(spec, data.X)
    R = fact.R
    K = R.T @ R  # gram matrix incl. jitter, kept consistent with the features
    L = n + float(np.linalg.eigvalsh(K * K)[-1]) / reg.lambda2
    mu = float(n)

    def obj_grad(gamma):
        return dual_objective_grad(gamma, R, data.M, reg)

    gamma0 = np.zeros((n, d, d))
    gamma_best, f_best, info = agd_strongly_convex(
        obj_grad, gamma0, mu, L, tol=tol, max_iters=max_iters
    )

    # recover B = (1/lambda2) [S]_- at the best dual point
    S = np.einsum("ai,bi,ipq->apbq", R, R, gamma_best, optimize=True).reshape(n * d, n * d)
    S.flat[:: n * d + 1] += reg.lambda1
    N, _ = _split_negative(S)
    B = N / reg.lambda2
    model = sosmodel.SosModel(
        fact, d, B,
        meta={"lambda1": reg.lambda1, "lambda2": reg.lambda2, "task": "psd-regression"},
    )
    primal = primal_objective(model, data, reg)
    dual = -f_best
    report = SolveReport(
        primal=primal,
        dual=dual,
        gap=primal - dual,
        iterations=info["iterations"],
        converged=info["converged"],
        wall_time=time.perf_counter() - t0,
        grad_norm=info["grad_norm"],
        tau=fact.tau,
        details={"mu": mu, "L": L, "dual_convention": "P* = -min D"},
    )
    return model, report
