"""Convex scalar regression with sum-of-squares Hessian constraints.

The fitted function is constrained to have, at each grid point v_1..v_l, a
Hessian equal to a PSD sum-of-squares surrogate Psi_j^T B Psi_j built on the
grid's kernel features (Psi_j = w_j (x) I_p).  Two dual formulations are
implemented, both solved by accelerated gradient with a backtracking line
search over symmetric multiplier blocks Gamma = (Gamma^(1), ..., Gamma^(l)).

Restricted ("approx") formulation — f = sum_i alpha_i k(., x_i) over the data:

    D(Gamma) = Z(Gamma)^T A^{-1} Z(Gamma) + (1/(2 lambda2)) ||[S(Gamma)]_-||_F^2
    A = (1/n) K^2 + rho K,   Z(Gamma) = (1/n) K y + c(Gamma)/2,
    c_i = sum_j <Gamma^(j), d2 k(x_i, v_j)>,
    S(Gamma) = sum_j Psi_j Gamma^(j) Psi_j^T + lambda1 I,

with P* = (1/n)||y||^2 - min D, alpha* = A^{-1} Z(Gamma*) and
B* = (1/lambda2) [S(Gamma*)]_-.  A^{-1} is applied through the gram factor:
A = R^T ((1/n) R R^T + rho I) R, so only triangular and PD solves appear.

Unrestricted ("exact") formulation — f may also use derivative features
d2_ab k(., v_j); with W = ((1/n) K + rho I)^{-1} and
g_X = d2 K(X, V) : Gamma the dual is

    D(Gamma) = (1/(4 rho)) Gamma : Q : Gamma - (1/(4 n rho)) g_X^T W g_X
               + (1/n) y^T W g_X - (rho/n) y^T W y
               + (1/(2 lambda2)) ||[S(Gamma)]_-||_F^2,

where Q[j,ab;m,rs] = d4 k(v_j, v_m) (two derivatives at each grid point), and
P* = -min D.  The recovered function is

    f = sum_i beta_i k(., x_i) + (1/(2 rho)) sum_j <Gamma^(j), d2_ab k(., v_j)>,
    beta = (1/n) W y - (1/(2 n rho)) W g_X.

In both duals the gradient block j equals the constraint residual
H_f(v_j) - Psi_j^T B Psi_j at the current primal candidates, which doubles as
a convergence diagnostic.  Gamma = 0 makes the exact path collapse to kernel
ridge regression with alpha = (1/n) W y = (K + n rho I)^{-1} y.

Grid features may be Nystrom-compressed: with r landmarks z_1..z_r the block
at v_j becomes (R_z^{-T} k(Z, v_j)) (x) I_p; r = l reproduces the full
features exactly.  The lambda2 = 0 dual (hard PSD constraint) has no solver
branch; use ``feasibility_lambda2_zero``.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from . import kernels, sosmodel
from .errors import DimensionMismatchError, ValidationError
from .solvers import SolveReport, fista_backtracking


@dataclass(frozen=True)
class ScalarDataset:
    """Inputs X (n, p) with scalar targets y (n,)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "X", kernels._as_points(self.X))
        y = np.asarray(self.y, dtype=float).ravel()
        if y.shape[0] != self.X.shape[0]:
            raise DimensionMismatchError(f"{self.X.shape[0]} inputs but {y.shape[0]} targets")
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class NystromSpec:
    """Landmark compression of the constraint-grid features."""

    rank: int
    rule: str = "uniform-random"  # or "first"
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise ValidationError(f"Nystrom rank must be >= 1, got {self.rank}")
        if self.rule not in ("uniform-random", "first"):
            raise ValidationError(f"unknown landmark rule {self.rule!r}")


def constraint_features(spec: kernels.KernelSpec, grid, nystrom: NystromSpec = None):
    """Feature factorization over the grid (or its landmarks).

    Returns (fact, W, idx): fact is the GramFactorization over the feature
    anchors, W (r, l) holds the weight vector of each grid point as a column,
    idx is the landmark index array (None when uncompressed).
    """
    grid = kernels._as_points(grid)
    l = grid.shape[0]
    if nystrom is None or nystrom.rank >= l:
        fact = sosmodel.factorize(spec, grid)
        return fact, sosmodel.anchor_weights(fact), None
    if nystrom.rule == "first":
        idx = np.arange(nystrom.rank)
    else:
        rng = np.random.default_rng(nystrom.seed)
        idx = np.sort(rng.choice(l, size=nystrom.rank, replace=False))
    fact = sosmodel.factorize(spec, grid[idx])
    return fact, sosmodel.feature_weights(fact, grid), idx


def hessian_of_expansion(spec: kernels.KernelSpec, alpha, anchors, V) -> np.ndarray:
    """Hessians of f(x) = sum_i alpha_i k(x, x_i) at each row of V: (m, p, p)."""
    D2 = kernels.d2_tensor(spec, anchors, V)  # derivative acts on the V slot
    return np.einsum("ijab,i->jab", D2, np.asarray(alpha, dtype=float))


def _neg_part(S):
    lam, U = np.linalg.eigh(0.5 * (S + S.T))
    neg = np.minimum(lam, 0.0)
    return (U * (-neg)) @ U.T, float(neg @ neg)


class _FeatureOps:
    """Shared precomputation for the Omega* term over grid features."""

    def __init__(self, W, p, lambda1, lambda2):
        self.r, self.l = W.shape
        self.p = p
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.WW = np.einsum("al,bl->abl", W, W).reshape(self.r * self.r, self.l)
        self._G = W.T @ W  # feature gram over grid points

    def smoothness(self) -> float:
        """Curvature bound of the Omega* term: lambda_max(G o G) / lambda2."""
        return float(np.linalg.eigvalsh(self._G * self._G)[-1]) / self.lambda2

    def neg_and_terms(self, gamma):
        """[S(gamma)]_- as an (rp, rp) matrix plus its squared norm."""
        r, l, p = self.r, self.l, self.p
        G2 = gamma.reshape(l, p * p)
        S = (self.WW @ G2).reshape(r, r, p, p).transpose(0, 2, 1, 3).reshape(r * p, r * p)
        S.flat[:: r * p + 1] += self.lambda1
        return _neg_part(S)

    def omega_grad(self, N):
        """Blocks Psi_j^T N Psi_j / lambda2, shape (l, p, p)."""
        r, l, p = self.r, self.l, self.p
        N2 = N.reshape(r, p, r, p).transpose(0, 2, 1, 3).reshape(r * r, p * p)
        return (self.WW.T @ N2).reshape(l, p, p) / self.lambda2


class ApproxDualProblem:
    """Dual of the data-span-restricted formulation; exposes value/gradient."""

    def __init__(self, data: ScalarDataset, grid, spec: kernels.KernelSpec,
                 rho: float, reg: sosmodel.RegularizerSpec, nystrom: NystromSpec = None):
        _validate_fit_args(rho, reg)
        self.data, self.spec, self.rho, self.reg = data, spec, rho, reg
        self.grid = kernels._as_points(grid)
        if self.grid.shape[1] != data.p:
            raise DimensionMismatchError(
                f"grid dimension {self.grid.shape[1]} != input dimension {data.p}"
            )
        n, p = data.n, data.p
        self.K = kernels.gram(spec, data.X)
        self.fact_x = sosmodel.factorize(spec, data.X)
        # A = R^T ((1/n) R R^T + rho I) R with R the (jittered) gram factor
        R = self.fact_x.R
        self._R = R
        self._W2 = cho_factor(R @ R.T / n + rho * np.eye(n))
        self.feat_fact, W, self.landmark_idx = constraint_features(spec, self.grid, nystrom)
        self.feats = _FeatureOps(W, p, reg.lambda1, reg.lambda2)
        D2 = kernels.d2_tensor(spec, data.X, self.grid)  # (n, l, p, p)
        self._D2f = D2.reshape(n, -1)
        self._Ky_n = self.K @ data.y / n
        self.l = self.grid.shape[0]
        self._L0 = None

    def solve_A(self, z):
        t = solve_triangular(self._R, z, trans="T", lower=False)
        t = cho_solve(self._W2, t)
        return solve_triangular(self._R, t, lower=False)

    def _core(self, gamma, need_grad):
        z = self._Ky_n + 0.5 * (self._D2f @ gamma.ravel())
        alpha = self.solve_A(z)
        N, neg_sq = self.feats.neg_and_terms(gamma)
        val = float(z @ alpha) + neg_sq / (2.0 * self.reg.lambda2)
        if not need_grad:
            return val, None, alpha, N
        grad = (self._D2f.T @ alpha).reshape(self.l, self.data.p, self.data.p)
        grad -= self.feats.omega_grad(N)
        return val, grad, alpha, N

    def objective(self, gamma) -> float:
        return self._core(gamma, need_grad=False)[0]

    def objective_grad(self, gamma):
        val, grad, _, _ = self._core(gamma, need_grad=True)
        return val, grad

    def smoothness_bound(self) -> float:
        """Global curvature bound: quadratic-term Hessian plus the Omega* part."""
        if self._L0 is None:
            H = self._D2f.T @ self.solve_A(self._D2f) / 2.0
            lam = float(np.linalg.eigvalsh(0.5 * (H + H.T))[-1])
            self._L0 = lam + self.feats.smoothness()
        return self._L0

    def gamma0(self) -> np.ndarray:
        return np.zeros((self.l, self.data.p, self.data.p))


class ExactDualProblem:
    """Dual of the unrestricted formulation (derivative features included)."""

    def __init__(self, data: ScalarDataset, grid, spec: kernels.KernelSpec,
                 rho: float, reg: sosmodel.RegularizerSpec, nystrom: NystromSpec = None):
        _validate_fit_args(rho, reg)
        self.data, self.spec, self.rho, self.reg = data, spec, rho, reg
        self.grid = kernels._as_points(grid)
        if self.grid.shape[1] != data.p:
            raise DimensionMismatchError(
                f"grid dimension {self.grid.shape[1]} != input dimension {data.p}"
            )
        n, p = data.n, data.p
        self.l = self.grid.shape[0]
        y = data.y
        self.K = kernels.gram(spec, data.X)
        self._Wf = cho_factor(self.K / n + rho * np.eye(n))
        self._Wy = cho_solve(self._Wf, y)
        self._const = -rho / n * float(y @ self._Wy)
        D2 = kernels.d2_tensor(spec, data.X, self.grid)
        self._D2f = D2.reshape(n, -1)
        lpp = self.l * p * p
        # Gram matrix of the functions d2_ab k(., v_i); pair (i,a,b) rows with
        # (j,r,s) columns -- the raw tensor is laid out (i, j, a, b, r, s)
        D4 = kernels.d4_tensor(spec, self.grid)
        self._Q = D4.transpose(0, 2, 3, 1, 4, 5).reshape(lpp, lpp)
        self.feat_fact, W, self.landmark_idx = constraint_features(spec, self.grid, nystrom)
        self.feats = _FeatureOps(W, p, reg.lambda1, reg.lambda2)
        self._L0 = None

    def _core(self, gamma, need_grad):
        n, p, rho = self.data.n, self.data.p, self.rho
        g = gamma.ravel()
        gX = self._D2f @ g
        Wg = cho_solve(self._Wf, gX)
        Qg = self._Q @ g
        N, neg_sq = self.feats.neg_and_terms(gamma)
        val = (
            float(g @ Qg) / (4.0 * rho)
            - float(gX @ Wg) / (4.0 * n * rho)
            + float(self._Wy @ gX) / n
            + self._const
            + neg_sq / (2.0 * self.reg.lambda2)
        )
        if not need_grad:
            return val, None, Wg, N
        grad = (
            Qg / (2.0 * rho)
            - (self._D2f.T @ Wg) / (2.0 * n * rho)
            + (self._D2f.T @ self._Wy) / n
        ).reshape(self.l, p, p)
        grad -= self.feats.omega_grad(N)
        return val, grad, Wg, N

    def objective(self, gamma) -> float:
        return self._core(gamma, need_grad=False)[0]

    def objective_grad(self, gamma):
        val, grad, _, _ = self._core(gamma, need_grad=True)
        return val, grad

    def smoothness_bound(self) -> float:
        """Exact quadratic Hessian plus the Omega* curvature bound."""
        if self._L0 is None:
            n, rho = self.data.n, self.rho
            H = self._Q / (2.0 * rho)
            H = H - self._D2f.T @ cho_solve(self._Wf, self._D2f) / (2.0 * n * rho)
            lam = float(np.linalg.eigvalsh(0.5 * (H + H.T))[-1])
            self._L0 = lam + self.feats.smoothness()
        return self._L0

    def gamma0(self) -> np.ndarray:
        return np.zeros((self.l, self.data.p, self.data.p))


def _validate_fit_args(rho, reg):
    if not (rho > 0):
        raise ValidationError(f"rho must be positive, got {rho}")
    if reg.lambda2 <= 0:
        raise ValidationError(
            "the first-order dual solver requires lambda2 > 0; the hard-constraint "
            "lambda2 = 0 problem is available only through feasibility_lambda2_zero"
        )


def feasibility_lambda2_zero(gamma, W, lambda1: float, tol: float = 1e-8) -> dict:
    """Feasibility of the lambda2 = 0 dual: S(Gamma) = sum Psi_j Gamma_j Psi_j^T
    + lambda1 I must be PSD.  No solver branch exists for this case."""
    gamma = np.asarray(gamma, dtype=float)
    l, p, _ = gamma.shape
    r = W.shape[0]
    WW = np.einsum("al,bl->abl", W, W).reshape(r * r, l)
    S = (WW @ gamma.reshape(l, p * p)).reshape(r, r, p, p)
    S = S.transpose(0, 2, 1, 3).reshape(r * p, r * p)
    S.flat[:: r * p + 1] += lambda1
    lam_min = float(np.linalg.eigvalsh(0.5 * (S + S.T))[0])
    scale = max(abs(lambda1), float(np.abs(S).max()), 1.0)
    return {"min_eig": lam_min, "feasible": lam_min >= -tol * scale}


@dataclass
class ConvexModel:
    """A scalar fit whose Hessian is tied to a PSD sum-of-squares surrogate.

    ``kind == "approx"``: f(x) = sum_i alpha_i k(x, x_i).
    ``kind == "exact"``:  f(x) = sum_i alpha_i k(x, x_i)
                                 + (1/(2 rho)) sum_j <gamma^(j), d2 k(x, v_j)>.
    ``sos`` holds the PSD surrogate F_B over the grid (or landmark) features.
    """

    kind: str
    kernel: kernels.KernelSpec
    anchors: np.ndarray  # (n, p)
    alpha: np.ndarray  # (n,)
    grid: np.ndarray  # (l, p)
    sos: sosmodel.SosModel
    rho: float
    gamma: np.ndarray = None  # (l, p, p), exact kind only
    meta: dict = field(default_factory=dict)

    def predict(self, X) -> np.ndarray:
        X = kernels._as_points(X)
        out = kernels.gram(self.kernel, X, self.anchors) @ self.alpha
        if self.kind == "exact":
            D2 = kernels.d2_tensor(self.kernel, X, self.grid)
            out = out + np.einsum("qjab,jab->q", D2, self.gamma) / (2.0 * self.rho)
        return out

    def hessians(self, V) -> np.ndarray:
        """Hessian of the fitted scalar function at each row of V: (m, p, p)."""
        H = hessian_of_expansion(self.kernel, self.alpha, self.anchors, V)
        if self.kind == "exact":
            D4 = kernels.d4_tensor(self.kernel, V, self.grid)
            H = H + np.einsum("qjabrs,jrs->qab", D4, self.gamma) / (2.0 * self.rho)
        return H

    def sos_hessians(self, V) -> np.ndarray:
        """The PSD surrogate Psi^T B Psi at each row of V: (m, p, p)."""
        return self.sos.evaluate_batch(V)


def _finalize(problem, gamma_best, f_best, info, t0, kind):
    data, reg, rho = problem.data, problem.reg, problem.rho
    n = data.n
    val, grad, aux, N = problem._core(gamma_best, need_grad=True)
    B = N / reg.lambda2
    sos = sosmodel.SosModel(
        problem.feat_fact, data.p, B,
        meta={"lambda1": reg.lambda1, "lambda2": reg.lambda2, "task": "hessian-surrogate"},
    )
    if kind == "approx":
        alpha = aux  # _core already solved A alpha = Z(gamma)
        fX = problem.K @ alpha
        rkhs = float(alpha @ fX)
        dual = float(data.y @ data.y) / n - f_best
        gamma_out = None
    else:
        Wg = aux
        alpha = problem._Wy / n - Wg / (2.0 * n * rho)
        gX = problem._D2f @ gamma_best.ravel()
        fX = problem.K @ alpha + gX / (2.0 * rho)
        quad4 = float(gamma_best.ravel() @ (problem._Q @ gamma_best.ravel()))
        rkhs = (
            float(alpha @ (problem.K @ alpha))
            + float(alpha @ gX) / rho
            + quad4 / (4.0 * rho * rho)
        )
        dual = -f_best
        gamma_out = gamma_best
    model = ConvexModel(
        kind=kind, kernel=problem.spec, anchors=data.X, alpha=alpha,
        grid=problem.grid, sos=sos, rho=rho, gamma=gamma_out,
        meta={"rho": rho, "lambda1": reg.lambda1, "lambda2": reg.lambda2,
              "landmarks": None if problem.landmark_idx is None
              else problem.landmark_idx.tolist()},
    )
    resid = fX - data.y
    primal = float(resid @ resid) / n + rho * rkhs + sosmodel.omega(B, reg)
    per_block = np.sqrt(np.sum(grad * grad, axis=(1, 2)))
    report = SolveReport(
        primal=primal,
        dual=dual,
        gap=primal - dual,
        iterations=info["iterations"],
        converged=info["converged"],
        wall_time=time.perf_counter() - t0,
        grad_norm=info["grad_norm"],
        tau=problem.feat_fact.tau,
        details={
            "max_constraint_residual": float(per_block.max()) if per_block.size else 0.0,
            "backtracks": info.get("backtracks", 0),
            "dual_convention": "P* = (1/n)||y||^2 - min D" if kind == "approx"
            else "P* = -min D",
        },
    )
    return model, report


def fit_approx(data: ScalarDataset, spec: kernels.KernelSpec, rho: float,
               reg: sosmodel.RegularizerSpec, grid=None, nystrom: NystromSpec = None,
               tol: float = 1e-10, max_iters: int = 50_000):
    """Fit the data-span-restricted formulation; returns (ConvexModel, SolveReport)."""
    t0 = time.perf_counter()
    grid = data.X if grid is None else grid
    problem = ApproxDualProblem(data, grid, spec, rho, reg, nystrom)
    L0 = problem.smoothness_bound()
    gamma_best, f_best, info = fista_backtracking(
        problem.objective_grad, problem.objective, problem.gamma0(),
        tol=tol, max_iters=max_iters, L0=L0, L_max=1024.0 * L0,
    )
    return _finalize(problem, gamma_best, f_best, info, t0, "approx")


def fit_exact(data: ScalarDataset, spec: kernels.KernelSpec, rho: float,
              reg: sosmodel.RegularizerSpec, grid=None, nystrom: NystromSpec = None,
              tol: float = 1e-10, max_iters: int = 50_000):
    """Fit the unrestricted formulation; returns (ConvexModel, SolveReport)."""
    t0 = time.perf_counter()
    grid = data.X if grid is None else grid
    problem = ExactDualProblem(data, grid, spec, rho, reg, nystrom)
    L0 = problem.smoothness_bound()
    gamma_best, f_best, info = fista_backtracking(
        problem.objective_grad, problem.objective, problem.gamma0(),
        tol=tol, max_iters=max_iters, L0=L0, L_max=1024.0 * L0,
    )
    return _finalize(problem, gamma_best, f_best, info, t0, "exact")
