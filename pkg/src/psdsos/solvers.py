"""First-order solver loops shared by the dual problems.

Two variants:

* ``agd_strongly_convex`` — Nesterov's method with constant momentum
  (sqrt(kappa)-1)/(sqrt(kappa)+1) for mu-strongly-convex, L-smooth objectives
  with known constants.
* ``fista_backtracking`` — accelerated gradient with a halving/doubling line
  search (sufficient-decrease test) for smooth convex objectives whose
  curvature constant is unknown, plus a function-value restart.

Both minimize, start from a caller-supplied point and track the best
objective seen (so the reported best-so-far sequence is non-increasing by
construction).

Stopping: the strongly convex loop uses the certificate
f - f* <= ||grad||^2 / (2 mu), declaring convergence when that bound drops
under tol * (1 + |f|); objective-change tests are useless there because with
condition numbers around 1/lambda2 the early momentum build-up moves the
objective less per step than any tol long before the solve is done.  The
line-search loop has no usable mu, so it stops when the objective change
stays under tol * (1 + |f|) for STALL_ITERS consecutive iterations while the
iterate is also at rest (momentum can coast through flat valleys with tiny
objective changes), or on gradient norm below tol * (1 + |f|).  Both stop at
the iteration cap with converged=False.
"""

import time
from dataclasses import dataclass, field

import numpy as np

STALL_ITERS = 5


@dataclass
class SolveReport:
    """Bookkeeping for one dual solve."""

    primal: float = np.nan
    dual: float = np.nan
    gap: float = np.nan
    iterations: int = 0
    converged: bool = False
    wall_time: float = 0.0
    grad_norm: float = np.nan
    tau: float = 0.0
    details: dict = field(default_factory=dict)


def _norm(g) -> float:
    return float(np.sqrt(np.sum(g * g)))


def agd_strongly_convex(obj_grad, x0, mu, L, tol=1e-10, max_iters=50_000):
    """Minimize with constant-momentum accelerated gradient descent.

    Returns (x_best, f_best, info dict).
    """
    if not (L >= mu > 0):
        raise ValueError(f"need L >= mu > 0, got mu={mu}, L={L}")
    sq_kappa = np.sqrt(L / mu)
    beta = (sq_kappa - 1.0) / (sq_kappa + 1.0)
    x = np.array(x0, dtype=float, copy=True)
    y = x.copy()
    f_best, x_best = np.inf, x.copy()
    grad_norm = np.inf
    converged = False
    t0 = time.perf_counter()
    it = 0
    for it in range(1, max_iters + 1):
        f, g = obj_grad(y)
        if f < f_best:
            f_best, x_best = f, y.copy()
        grad_norm = _norm(g)
        # certificate f - f* <= ||g||^2 / (2 mu)
        if grad_norm * grad_norm <= 2.0 * mu * tol * (1.0 + abs(f)):
            converged = True
            break
        x_new = y - g / L
        y = x_new + beta * (x_new - x)
        x = x_new
    info = {
        "iterations": it,
        "converged": converged,
        "grad_norm": grad_norm,
        "wall_time": time.perf_counter() - t0,
        "mu": mu,
        "L": L,
    }
    return x_best, f_best, info


def fista_backtracking(
    obj_grad, obj, x0, tol=1e-10, max_iters=50_000, L0=1.0, L_min=1e-12,
    L_max=None,
):
    """Minimize with FISTA plus backtracking line search.

    ``obj_grad(x) -> (f, grad)`` and ``obj(x) -> f``; the latter is used for
    the sufficient-decrease test.  Returns (x_best, f_best, info dict).

    ``L_max``: pass a safe multiple of a certified global curvature bound
    when one is known.  Beyond the true bound sufficient decrease holds in
    exact arithmetic, so a search failure past ``L_max`` is round-off in the
    objective (its internal terms can dwarf the final value when iterates
    grow) and the step is accepted as-is; without it the search keeps
    doubling and a persistent failure raises, which is the right behaviour
    when the gradient itself might be wrong.
    """
    x = np.array(x0, dtype=float, copy=True)
    x_prev = x.copy()
    t_mom = 1.0
    L = max(L0, L_min)
    f_best, x_best = np.inf, x.copy()
    f_x_prev = None
    grad_norm = np.inf
    converged = False
    backtracks = 0
    stall = 0
    t0 = time.perf_counter()
    it = 0
    for it in range(1, max_iters + 1):
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
        y = x + ((t_mom - 1.0) / t_next) * (x - x_prev)
        f_y, g = obj_grad(y)
        if f_y < f_best:
            f_best, x_best = f_y, y.copy()
        grad_norm = _norm(g)
        if grad_norm <= tol * (1.0 + abs(f_y)):
            converged = True
            break
        # halving/doubling search for a curvature bound with sufficient decrease;
        # the slack keeps round-off noise in f from doubling L without bound
        L = max(L * 0.7, L_min)
        gg = float(np.sum(g * g))
        slack = 1e-11 * (1.0 + abs(f_y))
        while True:
            x_new = y - g / L
            f_new = obj(x_new)
            if f_new <= f_y - 0.5 * gg / L + slack:
                break
            if L_max is not None and L >= L_max:
                break  # past the certified bound: failure is round-off, keep the step
            L *= 2.0
            backtracks += 1
            if L > 1e30:
                raise FloatingPointError("line search diverged; gradient unreliable")
        if f_new < f_best:
            f_best, x_best = f_new, x_new.copy()
        if f_x_prev is not None:
            # a plateau only counts as convergence when the iterate has also
            # stopped moving; momentum can coast through flat valleys with
            # tiny objective changes long before the solve is done
            moved = _norm(x_new - x)
            if (abs(f_new - f_x_prev) <= tol * (1.0 + abs(f_new))
                    and moved <= np.sqrt(tol) * (1.0 + _norm(x_new))):
                stall += 1
                if stall >= STALL_ITERS:
                    x_prev, x, t_mom = x, x_new, t_next
                    converged = True
                    break
            else:
                stall = 0
            if f_new > f_x_prev:  # function-value restart
                t_next = 1.0
        f_x_prev = f_new
        x_prev, x, t_mom = x, x_new, t_next
    info = {
        "iterations": it,
        "converged": converged,
        "grad_norm": grad_norm,
        "wall_time": time.perf_counter() - t0,
        "L_final": L,
        "backtracks": backtracks,
    }
    return x_best, f_best, info
