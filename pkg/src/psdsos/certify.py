"""A-posteriori eigenvalue lower bounds from scattered-data interpolation.

For a symmetric-matrix-valued F that agrees with a PSD surrogate at sample
points X_hat inside a domain that is a union of balls of radius r_dom, the
minimum eigenvalue of F on the whole domain is bounded below by -eps with

    eps = C0(p, m) * (seminorm_term + M * D_m * tr B) * h^m,
    C0(p, m) = 3 * (p^m / m!) * max(1, 18 (m-1)^2)^m,

where h is the fill distance of X_hat in the domain, m the derivative order
used, and (M, D_m) smoothness constants of the kernel's function space.  The
bound is valid only when the samples are dense enough:

    h <= r_dom * min(1, 1 / (18 (m-1)^2))        (threshold r_dom for m = 1).

``seminorm_term`` is either the sum of the diagonal entries' semi-norms
|F_ii|_{X,m} (default) or the tighter lambda_max of the full semi-norm matrix
(|F_ij|_{X,m})_ij.  Semi-norms sup_{|a|=m, x} |d^a F_ij(x)| are *estimated*
by order-m central finite differences on a caller-supplied grid and flagged
as estimates in the report.

For Sobolev-type spaces of order s > p/2 + m the constants are

    M   = (2 pi)^{p/2} * 2^{s+1/2},
    D_m = (2 pi)^{p/2} * sqrt(G(m + p/2) G(s - p/2 - m) / (G(s - p/2) G(p/2)))

(G = Gamma function).  For other kernels the caller supplies constants and
the report records their provenance.

The same bound applied to the Hessian of a scalar fit gives a convexity
deficit eta: f + (eta/2) ||x||^2 is convex on the domain.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ValidationError

SOBOLEV = "sobolev-formula"
USER = "user-supplied"


@dataclass(frozen=True)
class SmoothnessConstants:
    """Kernel-space constants entering the certificate, with provenance."""

    M: float
    D_m: float
    m: int
    source: str = USER

    def __post_init__(self):
        if self.m < 1:
            raise ValidationError(f"derivative order m must be >= 1, got {self.m}")
        if not (self.M > 0 and self.D_m > 0):
            raise ValidationError("smoothness constants must be positive")


def sobolev_constants(s: float, p: int, m: int) -> SmoothnessConstants:
    """Constants for a Sobolev space of order s on R^p (requires s > p/2 + m)."""
    if not s > p / 2 + m:
        raise ValidationError(
            f"Sobolev order must satisfy s > p/2 + m; got s={s}, p={p}, m={m}"
        )
    two_pi = (2.0 * math.pi) ** (p / 2.0)
    M = two_pi * 2.0 ** (s + 0.5)
    D_m = two_pi * math.sqrt(
        math.gamma(m + p / 2.0)
        * math.gamma(s - p / 2.0 - m)
        / (math.gamma(s - p / 2.0) * math.gamma(p / 2.0))
    )
    return SmoothnessConstants(M=M, D_m=D_m, m=m, source=SOBOLEV)


def c0_constant(p: int, m: int) -> float:
    """C0(p, m) = 3 (p^m / m!) max(1, 18 (m-1)^2)^m."""
    if p < 1 or m < 1:
        raise ValidationError(f"need p >= 1 and m >= 1, got p={p}, m={m}")
    return 3.0 * (p**m / math.factorial(m)) * max(1.0, 18.0 * (m - 1) ** 2) ** m


def density_threshold(domain_radius: float, m: int) -> float:
    """Largest admissible fill distance: r_dom * min(1, 1/(18 (m-1)^2))."""
    if m == 1:
        return domain_radius
    return domain_radius * min(1.0, 1.0 / (18.0 * (m - 1) ** 2))


def probe_cloud(low, high, p: int, count: int = None, seed: int = 0) -> np.ndarray:
    """Uniform probe points in the box [low, high]^p (default 10^4 * p probes)."""
    count = 10_000 * p if count is None else count
    rng = np.random.default_rng(seed)
    low = np.broadcast_to(np.asarray(low, dtype=float), (p,))
    high = np.broadcast_to(np.asarray(high, dtype=float), (p,))
    return rng.uniform(low, high, size=(count, p))


def fill_distance(samples, probes) -> float:
    """max over probes of the distance to the nearest sample."""
    samples = np.asarray(samples, dtype=float)
    probes = np.asarray(probes, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if probes.ndim == 1:
        probes = probes[:, None]
    return float(cdist(probes, samples).min(axis=1).max())


def _multi_indices(p: int, m: int):
    """All multi-indices alpha in N^p with |alpha| = m."""
    for bars in itertools.combinations(range(m + p - 1), p - 1):
        alpha = []
        prev = -1
        for b in bars:
            alpha.append(b - prev - 1)
            prev = b
        alpha.append(m + p - 2 - prev)
        yield tuple(alpha)


def _central_diff(func, x, alpha, step: float):
    """Order-|alpha| central difference of func at x (func maps (p,) -> array)."""
    terms = []
    for idx in itertools.product(*(range(a + 1) for a in alpha)):
        coef = 1.0
        shift = np.zeros(len(alpha))
        for i, (a, j) in enumerate(zip(alpha, idx)):
            coef *= (-1.0) ** j * math.comb(a, j)
            shift[i] = (a / 2.0 - j) * step
        terms.append(coef * np.asarray(func(x + shift), dtype=float))
    m = sum(alpha)
    return sum(terms) / step**m


def seminorm_matrix(func, grid, m: int, step: float = 1e-4) -> np.ndarray:
    """Estimated semi-norm matrix (|F_ij|_{X,m})_ij over the grid.

    ``func`` maps a point (p,) to a (d, d) matrix (or a scalar, treated as
    1 x 1).  The estimate takes the max over grid points and multi-indices of
    the order-m central difference; it is a finite-sample, finite-step proxy
    for the true semi-norm.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim == 1:
        grid = grid[:, None]
    p = grid.shape[1]
    probe = np.atleast_2d(np.asarray(func(grid[0]), dtype=float))
    out = np.zeros_like(probe)
    wrapped = lambda x: np.atleast_2d(np.asarray(func(x), dtype=float))
    for alpha in _multi_indices(p, m):
        for x in grid:
            est = np.abs(_central_diff(wrapped, x, alpha, step))
            out = np.maximum(out, est)
    return out


@dataclass
class CertificateReport:
    """All quantities entering an eigenvalue lower bound."""

    eps: float
    C: float
    C0: float
    h: float
    m: int
    p: int
    seminorm_term: float
    trace_B: float
    form: str  # "trace" or "lambda-max"
    valid: bool
    threshold: float
    constants_source: str
    seminorms_estimated: bool = True
    details: dict = field(default_factory=dict)


def eigen_bound(
    constants: SmoothnessConstants,
    p: int,
    h: float,
    trace_B: float,
    seminorms: np.ndarray,
    domain_radius: float,
    form: str = "trace",
    seminorms_estimated: bool = True,
) -> CertificateReport:
    """Assemble the certificate eps = C0 (seminorm_term + M D_m tr B) h^m.

    ``seminorms`` is the (d, d) semi-norm matrix (or its diagonal as a
    vector).  form="trace" uses the sum of diagonal semi-norms; the tighter
    form="lambda-max" uses the largest eigenvalue of the full matrix.
    """
    seminorms = np.atleast_1d(np.asarray(seminorms, dtype=float))
    if form == "trace":
        diag = np.diag(seminorms) if seminorms.ndim == 2 else seminorms
        s_term = float(np.sum(diag))
    elif form == "lambda-max":
        if seminorms.ndim != 2:
            raise ValidationError("lambda-max form needs the full semi-norm matrix")
        s_term = float(np.linalg.eigvalsh(0.5 * (seminorms + seminorms.T))[-1])
    else:
        raise ValidationError(f"unknown certificate form {form!r}")
    m = constants.m
    C0 = c0_constant(p, m)
    C = C0 * (s_term + constants.M * constants.D_m * trace_B)
    thresh = density_threshold(domain_radius, m)
    return CertificateReport(
        eps=C * h**m,
        C=C,
        C0=C0,
        h=h,
        m=m,
        p=p,
        seminorm_term=s_term,
        trace_B=trace_B,
        form=form,
        valid=bool(h <= thresh),
        threshold=thresh,
        constants_source=constants.source,
        seminorms_estimated=seminorms_estimated,
        details={"M": constants.M, "D_m": constants.D_m},
    )


def matrix_certificate(
    F, B_trace: float, samples, constants: SmoothnessConstants,
    low, high, p: int, domain_radius: float,
    fd_grid=None, fd_step: float = 1e-4, form: str = "trace",
    probes: int = None, seed: int = 0,
) -> CertificateReport:
    """End-to-end certificate for a matrix-valued callable F.

    Fill distance is estimated against a uniform probe cloud in the box
    [low, high]^p; semi-norms by finite differences on ``fd_grid``
    (default: the probe cloud subsampled to 200 points).
    """
    cloud = probe_cloud(low, high, p, count=probes, seed=seed)
    h = fill_distance(samples, cloud)
    if fd_grid is None:
        fd_grid = cloud[:: max(1, len(cloud) // 200)]
    N = seminorm_matrix(F, fd_grid, constants.m, step=fd_step)
    return eigen_bound(constants, p, h, B_trace, N, domain_radius, form=form)


def convexity_deficit(
    hessian, B_trace: float, samples, constants: SmoothnessConstants,
    low, high, p: int, domain_radius: float,
    fd_grid=None, fd_step: float = 1e-4, form: str = "trace",
    probes: int = None, seed: int = 0,
) -> CertificateReport:
    """Certificate applied to a Hessian: adding (eps/2)||x||^2 restores convexity."""
    return matrix_certificate(
        hessian, B_trace, samples, constants, low, high, p, domain_radius,
        fd_grid=fd_grid, fd_step=fd_step, form=form, probes=probes, seed=seed,
    )


def empirical_min_eig(F, grid) -> float:
    """min over the grid of lambda_min(F(x)); F maps (p,) -> (d, d) or scalar."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim == 1:
        grid = grid[:, None]
    best = np.inf
    for x in grid:
        Fx = np.atleast_2d(np.asarray(F(x), dtype=float))
        lam = np.linalg.eigvalsh(0.5 * (Fx + Fx.T))[0]
        best = min(best, float(lam))
    return best
