"""Reference estimators: kernel ridge regression and max-affine convex fits.

KRR minimizes (1/n) sum (f(x_i) - y_i)^2 + rho ||f||^2, i.e. the same
loss/penalty scaling as the SoS objective, so rho values are comparable:
alpha = (K + n rho I)^{-1} y.

The max-affine (piecewise-linear) convex fit solves the QP

    min_{theta, zeta}  (1/n) sum_i (y_i - theta_i)^2
    s.t.               theta_i + zeta_i^T (x_j - x_i) <= theta_j   for all i, j

by an operator-splitting (ADMM) loop on the constraint slack, with dense
factorization of the (n(1+p))-dimensional normal matrix — no external QP
solver.  The predictor is f(x) = max_i { theta_i + zeta_i^T (x - x_i) }.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import kernels
from .errors import DimensionMismatchError
from .cvxreg import ScalarDataset


@dataclass
class KrrModel:
    kernel: kernels.KernelSpec
    anchors: np.ndarray
    alpha: np.ndarray
    rho: float

    def predict(self, X) -> np.ndarray:
        return kernels.gram(self.kernel, X, self.anchors) @ self.alpha


def krr_fit(data: ScalarDataset, spec: kernels.KernelSpec, rho: float) -> KrrModel:
    K = kernels.gram(spec, data.X)
    n = data.n
    alpha = np.linalg.solve(K + n * rho * np.eye(n), data.y)
    return KrrModel(spec, data.X, alpha, rho)


@dataclass
class PwlModel:
    anchors: np.ndarray  # (n, p)
    theta: np.ndarray  # (n,)
    zeta: np.ndarray  # (n, p)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[1] != self.anchors.shape[1]:
            raise DimensionMismatchError(
                f"queries have dimension {X.shape[1]}, anchors {self.anchors.shape[1]}"
            )
        # pieces[i, q] = theta_i + zeta_i . (x_q - x_i)
        pieces = self.theta[:, None] + self.zeta @ X.T
        pieces -= np.sum(self.zeta * self.anchors, axis=1)[:, None]
        return pieces.max(axis=0)

    def max_violation(self) -> float:
        """max over (i, j) of theta_i + zeta_i^T (x_j - x_i) - theta_j."""
        return float((self.predict(self.anchors) - self.theta).max())


@dataclass
class PwlFitReport:
    objective: float = np.nan
    iterations: int = 0
    converged: bool = False
    wall_time: float = 0.0
    primal_residual: float = np.nan
    dual_residual: float = np.nan
    details: dict = field(default_factory=dict)


def _pwl_constraints(X):
    """Rows of A u <= 0 over u = [theta; vec(zeta)] for all ordered pairs i != j."""
    n, p = X.shape
    rows = []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            row = np.zeros(n + n * p)
            row[i] = 1.0
            row[j] -= 1.0
            row[n + i * p : n + (i + 1) * p] = X[j] - X[i]
            rows.append(row)
    return np.array(rows)


def pwl_fit(
    data: ScalarDataset,
    tol: float = 1e-7,
    max_iters: int = 20_000,
    step: float = 1.0,
):
    """Solve the max-affine QP by ADMM; returns (PwlModel, PwlFitReport)."""
    t0 = time.perf_counter()
    X, y = data.X, data.y
    n, p = X.shape
    nv = n + n * p
    A = _pwl_constraints(X)
    m = A.shape[0]
    # quadratic objective (1/n)||theta - y||^2, flat in zeta
    P_diag = np.zeros(nv)
    P_diag[:n] = 2.0 / n
    q = np.zeros(nv)
    q[:n] = -2.0 / n * y

    sigma = 1e-10  # tiny ridge keeps the normal matrix PD when zeta is unconstrained
    AtA = A.T @ A
    rho = step

    def factor(rho):
        Mmat = AtA * rho
        Mmat.flat[:: nv + 1] += P_diag + sigma
        return cho_factor(Mmat)

    fac = factor(rho)
    u = np.zeros(nv)
    z = np.zeros(m)
    w = np.zeros(m)
    converged = False
    r_norm = s_norm = np.inf
    refactors = 0
    it = 0
    for it in range(1, max_iters + 1):
        u = cho_solve(fac, -q + rho * (A.T @ (z - w)))
        Au = A @ u
        z_old = z
        z = np.minimum(Au + w, 0.0)
        w = w + Au - z
        r_norm = float(np.abs(Au - z).max())
        s_norm = float(np.abs(rho * (A.T @ (z - z_old))).max())
        if r_norm <= tol and s_norm <= tol:
            converged = True
            break
        # residual balancing keeps the splitting well-scaled
        if it % 50 == 0 and refactors < 40:
            if r_norm > 10.0 * s_norm:
                rho *= 2.0
                w /= 2.0
                fac = factor(rho)
                refactors += 1
            elif s_norm > 10.0 * r_norm:
                rho /= 2.0
                w *= 2.0
                fac = factor(rho)
                refactors += 1
    theta = u[:n]
    zeta = u[n:].reshape(n, p)
    model = PwlModel(X.copy(), theta, zeta)
    obj = float(np.sum((theta - y) ** 2) / n)
    report = PwlFitReport(
        objective=obj,
        iterations=it,
        converged=converged,
        wall_time=time.perf_counter() - t0,
        primal_residual=r_norm,
        dual_residual=s_norm,
        details={"rho_final": rho, "refactors": refactors},
    )
    return model, report
