"""Kernel families and their closed-form derivatives.

Two translation-invariant families on R^p:

* ``gaussian``:     k(x, y) = exp(-||x - y||^2 / sigma^2)
* ``exponential``:  k(x, y) = exp(-||x - y|| / sigma)

The Gaussian family is smooth and supports the second- and fourth-order
cross derivatives needed for Hessian constraints.  With c = 1/sigma^2,
u = x - y and g = exp(-c ||u||^2):

    d^2 k / dy_p dy_q           = (-2 c d_pq + 4 c^2 u_p u_q) g
    d^4 k / dx_p dx_q dy_r dy_s = [ 4 c^2 (d_pr d_qs + d_qr d_ps + d_pq d_rs)
                                    - 8 c^3 (d_pr u_q u_s + d_qr u_p u_s
                                             + d_pq u_r u_s + d_ps u_q u_r
                                             + d_qs u_p u_r + d_rs u_p u_q)
                                    + 16 c^4 u_p u_q u_r u_s ] g

(d_pq is the Kronecker delta.)  The exponential kernel is not twice
differentiable at the diagonal, so derivative requests for it raise
``UnsupportedKernelError``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionMismatchError, UnsupportedKernelError, ValidationError

GAUSSIAN = "gaussian"
EXPONENTIAL = "exponential"
FAMILIES = (GAUSSIAN, EXPONENTIAL)


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family plus its bandwidth."""

    family: str
    sigma: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(
                f"unknown kernel family {self.family!r}; expected one of {FAMILIES}"
            )
        if not (self.sigma > 0):
            raise ValidationError(f"kernel bandwidth must be positive, got {self.sigma}")


def _as_points(X) -> np.ndarray:
    """Coerce to a float (n, p) array of points."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValidationError(f"expected an (n, p) array of points, got shape {X.shape}")
    return X


def _as_point(x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise ValidationError(f"expected a single point of shape (p,), got {x.shape}")
    return x


def _check_indices(dim: int, *idx):
    for i in idx:
        if not 0 <= i < dim:
            raise ValidationError(
                f"derivative index {i} out of range for input dimension {dim}"
            )


def evaluate(spec: KernelSpec, x, y) -> float:
    """k(x, y) for a single pair of points."""
    x, y = _as_point(x), _as_point(y)
    if x.shape != y.shape:
        raise DimensionMismatchError(
            f"point dimensions differ: {x.shape[0]} vs {y.shape[0]}"
        )
    r = np.linalg.norm(x - y)
    if spec.family == GAUSSIAN:
        return float(np.exp(-(r * r) / spec.sigma**2))
    return float(np.exp(-r / spec.sigma))


def gram(spec: KernelSpec, X, Y=None) -> np.ndarray:
    """Kernel matrix k(X, Y); square gram matrix when Y is None."""
    X = _as_points(X)
    Y = X if Y is None else _as_points(Y)
    if X.shape[1] != Y.shape[1]:
        raise ValidationError(f"point dimensions differ: {X.shape[1]} vs {Y.shape[1]}")
    if spec.family == GAUSSIAN:
        return np.exp(-cdist(X, Y, "sqeuclidean") / spec.sigma**2)
    return np.exp(-cdist(X, Y, "euclidean") / spec.sigma)


def _require_gaussian(spec: KernelSpec, what: str):
    if spec.family != GAUSSIAN:
        raise UnsupportedKernelError(
            f"{what} requires a twice-differentiable kernel; "
            f"the {spec.family!r} family is not C^2 at the diagonal"
        )


def eval_d2(spec: KernelSpec, x, y, p: int, q: int) -> float:
    """d^2 k(x, y) / dy_p dy_q for the Gaussian family."""
    _require_gaussian(spec, "eval_d2")
    x, y = _as_point(x), _as_point(y)
    _check_indices(x.shape[0], p, q)
    c = 1.0 / spec.sigma**2
    u = x - y
    g = np.exp(-c * (u @ u))
    return float((-2.0 * c * (p == q) + 4.0 * c * c * u[p] * u[q]) * g)


def eval_d4(spec: KernelSpec, x, y, p: int, q: int, r: int, s: int) -> float:
    """d^4 k(x, y) / dx_p dx_q dy_r dy_s for the Gaussian family."""
    _require_gaussian(spec, "eval_d4")
    x, y = _as_point(x), _as_point(y)
    _check_indices(x.shape[0], p, q, r, s)
    c = 1.0 / spec.sigma**2
    u = x - y
    g = np.exp(-c * (u @ u))
    # int() everywhere: numpy bools add as logical-or, which would collapse
    # the delta count from 3 to 1 on repeated indices
    dd = (
        int((p == r) and (q == s))
        + int((q == r) and (p == s))
        + int((p == q) and (r == s))
    )
    du = (
        (p == r) * u[q] * u[s]
        + (q == r) * u[p] * u[s]
        + (p == q) * u[r] * u[s]
        + (p == s) * u[q] * u[r]
        + (q == s) * u[p] * u[r]
        + (r == s) * u[p] * u[q]
    )
    val = 4.0 * c * c * dd - 8.0 * c**3 * du + 16.0 * c**4 * u[p] * u[q] * u[r] * u[s]
    return float(val * g)


def d2_tensor(spec: KernelSpec, X, V) -> np.ndarray:
    """All second cross-derivatives as an (n, l, p, p) tensor.

    out[i, j, a, b] = d^2 k(x_i, v_j) / dv_a dv_b.
    """
    _require_gaussian(spec, "d2_tensor")
    X, V = _as_points(X), _as_points(V)
    if X.shape[1] != V.shape[1]:
        raise ValidationError(f"point dimensions differ: {X.shape[1]} vs {V.shape[1]}")
    c = 1.0 / spec.sigma**2
    U = X[:, None, :] - V[None, :, :]  # (n, l, p)
    G = np.exp(-c * np.sum(U * U, axis=-1))  # (n, l)
    p = X.shape[1]
    eye = np.eye(p)
    out = -2.0 * c * eye[None, None] + 4.0 * c * c * np.einsum("ija,ijb->ijab", U, U)
    return out * G[:, :, None, None]


def d4_tensor(spec: KernelSpec, V, U=None) -> np.ndarray:
    """All fourth cross-derivatives as an (l, m, p, p, p, p) tensor.

    out[i, j, a, b, r, s] = d^4 k(v_i, u_j) / dv_a dv_b du_r du_s.
    """
    _require_gaussian(spec, "d4_tensor")
    V = _as_points(V)
    U = V if U is None else _as_points(U)
    if V.shape[1] != U.shape[1]:
        raise ValidationError(f"point dimensions differ: {V.shape[1]} vs {U.shape[1]}")
    c = 1.0 / spec.sigma**2
    D = V[:, None, :] - U[None, :, :]  # (l, m, p)
    G = np.exp(-c * np.sum(D * D, axis=-1))
    p = V.shape[1]
    I = np.eye(p)
    dd = (
        np.einsum("ar,bs->abrs", I, I)
        + np.einsum("br,as->abrs", I, I)
        + np.einsum("ab,rs->abrs", I, I)
    )
    DD = np.einsum("ija,ijb->ijab", D, D)  # (l, m, p, p)
    du = (
        np.einsum("ar,ijbs->ijabrs", I, DD)
        + np.einsum("br,ijas->ijabrs", I, DD)
        + np.einsum("ab,ijrs->ijabrs", I, DD)
        + np.einsum("as,ijbr->ijabrs", I, DD)
        + np.einsum("bs,ijar->ijabrs", I, DD)
        + np.einsum("rs,ijab->ijabrs", I, DD)
    )
    d4 = np.einsum("ija,ijb,ijr,ijs->ijabrs", D, D, D, D)
    out = 4.0 * c * c * dd[None, None] - 8.0 * c**3 * du + 16.0 * c**4 * d4
    return out * G[:, :, None, None, None, None]
