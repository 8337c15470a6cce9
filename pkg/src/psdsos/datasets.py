"""Synthetic data generators used by the experiments.

All randomness flows through numpy's seeded ``default_rng`` (PCG64), so every
dataset is reproducible bit-for-bit from its seed on a fixed numpy version.

PSD-curve task: points on the Bures-Wasserstein geodesic between two
covariance matrices,

    Sigma(t) = ((1-t) I + t T) Sigma0 ((1-t) I + t T),
    T = Sigma0^{-1/2} (Sigma0^{1/2} Sigma1 Sigma0^{1/2})^{1/2} Sigma0^{-1/2},

sampled at n times in [0, 1].  When Sigma0 is singular but Sigma1 is not, the
endpoints are swapped (t -> 1-t); when both are singular the closed form
((1-t) Sigma0^{1/2} + t Sigma1^{1/2})^2 applies if the endpoints commute, and
the geodesic is otherwise not implemented.

Convex-target task: scalar samples

    y_i = f_a(||X_i||) + noise * eps_i,
    f_a(r) = (cos(a r) - 1)/a^2 + r^2/2,      X_i ~ U([-b, b]^p).

f_a'' (r) = 1 - cos(a r) >= 0 and f_a' (r) = r - sin(a r)/a >= 0 on r >= 0,
so f_a is convex and non-decreasing on [0, inf); the composition with the
norm is therefore convex in any dimension.
"""

import numpy as np

from . import psdreg
from .cvxreg import ScalarDataset
from .errors import ValidationError
from .psdlinalg import symmetrize

SINGULAR_RTOL = 1e-12


def sqrtm_psd(S) -> np.ndarray:
    """Symmetric PSD square root; negative round-off eigenvalues clamp to 0."""
    S = symmetrize(S)
    lam, V = np.linalg.eigh(S)
    return (V * np.sqrt(np.maximum(lam, 0.0))) @ V.T


def bures_geodesic(S0, S1, t: float) -> np.ndarray:
    """Point at time t on the Bures-Wasserstein geodesic from S0 to S1."""
    S0, S1 = symmetrize(S0), symmetrize(S1)
    lam0 = np.linalg.eigvalsh(S0)
    lam1 = np.linalg.eigvalsh(S1)
    scale = max(lam0[-1], lam1[-1], np.finfo(float).tiny)
    if lam0[0] > SINGULAR_RTOL * scale:
        rt = sqrtm_psd(S0)
        lam, V = np.linalg.eigh(S0)
        inv_rt = (V / np.sqrt(np.maximum(lam, np.finfo(float).tiny))) @ V.T
        T = inv_rt @ sqrtm_psd(rt @ S1 @ rt) @ inv_rt
        Mt = (1.0 - t) * np.eye(S0.shape[0]) + t * T
        out = Mt @ S0 @ Mt
    elif lam1[0] > SINGULAR_RTOL * scale:
        out = bures_geodesic(S1, S0, 1.0 - t)
    elif np.abs(S0 @ S1 - S1 @ S0).max() <= 1e-10 * scale * scale:
        rt = (1.0 - t) * sqrtm_psd(S0) + t * sqrtm_psd(S1)
        out = rt @ rt
    else:
        raise ValidationError(
            "geodesic between two singular, non-commuting endpoints is not implemented"
        )
    return symmetrize(out)


# deterministic non-commuting PD endpoints for the PSD-curve experiment
def default_endpoints():
    c, s = np.cos(np.pi / 3.0), np.sin(np.pi / 3.0)
    Q = np.array([[c, -s], [s, c]])
    S0 = np.diag([1.0, 0.09])
    S1 = Q @ np.diag([0.09, 1.0]) @ Q.T
    return S0, S1


def bures_dataset(n: int = 12, S0=None, S1=None) -> psdreg.PsdDataset:
    """Geodesic sampled at n equispaced times in [0, 1], inputs shape (n, 1)."""
    if S0 is None or S1 is None:
        S0, S1 = default_endpoints()
    ts = np.linspace(0.0, 1.0, n)
    M = np.array([bures_geodesic(S0, S1, t) for t in ts])
    return psdreg.PsdDataset(ts[:, None], M)


def f_a(r, a: float = 1.0) -> np.ndarray:
    """The convex radial target (cos(a r) - 1)/a^2 + r^2/2."""
    r = np.asarray(r, dtype=float)
    return (np.cos(a * r) - 1.0) / a**2 + 0.5 * r * r


def convex_target(X, a: float = 1.0) -> np.ndarray:
    """f_a(||x||) rowwise."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return f_a(np.linalg.norm(X, axis=1), a=a)


def gen_convex_samples(
    n: int, p: int = 1, a: float = 1.0, half_width: float = 1.0,
    noise: float = 0.0, seed: int = 0,
) -> ScalarDataset:
    """n noisy samples of the convex radial target on [-half_width, half_width]^p."""
    if n < 1 or p < 1:
        raise ValidationError(f"need n >= 1 and p >= 1, got n={n}, p={p}")
    rng = np.random.default_rng(seed)
    X = rng.uniform(-half_width, half_width, size=(n, p))
    y = convex_target(X, a=a) + noise * rng.standard_normal(n)
    return ScalarDataset(X, y)
