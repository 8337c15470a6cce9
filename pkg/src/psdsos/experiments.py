"""Canonical cross-validation grids and the regression benchmark harness.

The grids reproduce the published selection protocol: the PSD task searches
lambda1 in {10^-n, n=0..8} u {0}, lambda2 in {10^-n, n=0..8},
sigma in {1, 0.1, 0.01} with leave-one-out folds; the convex task fixes
lambda1 = 0 and searches lambda2 in {10^-n, n=3..7}, sigma^2 in {1, 5, 10},
rho in {1e-3, 1e-5, 1e-7} with 5 folds.  Cells are ordered most-regularized
first so argmin tie-breaking stays conservative.

The benchmark fits convex sum-of-squares, kernel ridge, and piecewise-linear
regressors over a (dimension x noise x sample count x seed) lattice and
scores mean squared error against the noiseless target on fresh uniform
test points.  Inner solves run under capped budgets: cross-validation only
ranks cells, so moderately converged scores are enough, and the winning cell
is refit with a tighter budget.

At benchmark scale (n <= 40) the published convex-regression grid leaves the
kernel fits badly under-regularized: shrinkage stops at rho = 1e-3 and the
bandwidth at sigma^2 = 10, so with 10-20 noisy points both kernel methods
overfit or crater between samples while the piecewise-linear baseline, whose
convexity cone is a strong prior, cruises.  The benchmark therefore searches
wider axes -- heavier ridge levels and bandwidths up to several times the
domain diameter (where a Gaussian fit behaves like low-degree polynomial
regression and keeps growing toward the corners, which the target does too),
the *same* sigma^2 axis for the SoS and ridge fits so the comparison stays a
pure prior-vs-prior one.  The published axes remain the defaults of the
``*_cv`` helpers.

A caveat worth recording: even over the widened axes, validation-based
selection at n = 10 is noisy enough (folds of two points, a ~50-cell grid)
that the selected kernel cell lands 2-3x above the best fixed cell, while
the piecewise-linear baseline has no hyperparameters to select at all.
Oracle-selected ridge cells beat that baseline in every benchmark cell;
cross-validated ones reliably do so only from n = 20 up.  See the bench
notes in the repository for the measurements (selection statistics tried:
fold-mean, median, worst-fold, mean+std, repeated assignments, LOO).
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import baselines, cvxreg, datasets, kernels, modelselect, psdreg, sosmodel

PSD_LAMBDA1 = tuple(10.0 ** -n for n in range(9)) + (0.0,)
PSD_LAMBDA2 = tuple(10.0 ** -n for n in range(9))
PSD_SIGMA = (1.0, 0.1, 0.01)

CONVEX_LAMBDA2 = tuple(10.0 ** -n for n in range(3, 8))
CONVEX_SIGMA2 = (1.0, 5.0, 10.0)
CONVEX_RHO = (1e-3, 1e-5, 1e-7)

KRR_RHO = tuple(10.0 ** -n for n in range(0, 8))

# benchmark-scale axes (see module docstring); the ridge floor keeps the
# effective shrinkage n*rho >= 1e-4 -- below that the n <= 40 fits are
# numerically near-interpolation and their fold scores are pure noise
BENCH_LAMBDA2 = (1e-1, 1e-3, 1e-5, 1e-7)
BENCH_RHO = (1e-1, 1e-3, 1e-5)
BENCH_SIGMA2 = (1.0, 5.0, 10.0, 25.0, 50.0, 200.0, 400.0)
BENCH_KRR_RHO = tuple(10.0 ** -n for n in range(0, 6))


def psd_grid() -> list:
    return modelselect.cells_from_axes(
        {"lambda2": list(PSD_LAMBDA2), "lambda1": list(PSD_LAMBDA1),
         "sigma": list(PSD_SIGMA)}
    )


def convex_grid(lambda2=CONVEX_LAMBDA2, rho=CONVEX_RHO, sigma2=CONVEX_SIGMA2) -> list:
    return modelselect.cells_from_axes(
        {"lambda2": list(lambda2), "rho": list(rho), "sigma2": list(sigma2)}
    )


def krr_grid(rho=KRR_RHO, sigma2=CONVEX_SIGMA2) -> list:
    return modelselect.cells_from_axes(
        {"rho": list(rho), "sigma2": list(sigma2)}
    )


def fit_psd_cv(data: psdreg.PsdDataset, family: str = kernels.EXPONENTIAL,
               folds: int = None, seed: int = 0, cv_tol: float = 1e-6,
               cv_iters: int = 100, refit_tol: float = 1e-9,
               refit_iters: int = 20_000) -> modelselect.CvResult:
    """Leave-one-out grid search for the PSD regression task."""
    folds = data.n if folds is None else folds

    def fit(X, M, cell, _budget=None):
        tol, iters = (cv_tol, cv_iters) if _budget is None else _budget
        spec = kernels.KernelSpec(family, cell["sigma"])
        reg = sosmodel.RegularizerSpec(cell["lambda1"], cell["lambda2"])
        model, _ = psdreg.solve(psdreg.PsdDataset(X, M), spec, reg,
                                tol=tol, max_iters=iters)
        return model

    result = modelselect.grid_search(
        fit, lambda m, X: m.evaluate_batch(X), modelselect.frobenius_loss,
        data.X, data.M, psd_grid(), folds, seed=seed, refit=False,
    )
    model = fit(data.X, data.M, result.best_cell,
                _budget=(refit_tol, refit_iters))
    return modelselect.CvResult(
        cells=result.cells, mean_loss=result.mean_loss, std_loss=result.std_loss,
        fold_loss=result.fold_loss, best_index=result.best_index,
        best_cell=result.best_cell, model=model, details=result.details,
    )


def fit_convex_cv(data: cvxreg.ScalarDataset, family: str = kernels.GAUSSIAN,
                  folds: int = 5, seed: int = 0, cv_tol: float = 1e-4,
                  cv_iters: int = 250, refit_tol: float = 1e-6,
                  refit_iters: int = 2000, variant: str = "approx",
                  nystrom_cap: int = None, cells: list = None) -> modelselect.CvResult:
    """5-fold grid search for the convex regression task (lambda1 fixed at 0).

    ``nystrom_cap``: compress constraint features to this rank whenever the
    (sub)fit has more points than the cap.  ``cells`` overrides the published
    grid (entries need lambda2 / rho / sigma2 keys).
    """
    fitter = cvxreg.fit_approx if variant == "approx" else cvxreg.fit_exact
    cells = convex_grid() if cells is None else cells

    def fit(X, y, cell, _budget=None):
        tol, iters = (cv_tol, cv_iters) if _budget is None else _budget
        spec = kernels.KernelSpec(family, float(np.sqrt(cell["sigma2"])))
        reg = sosmodel.RegularizerSpec(0.0, cell["lambda2"])
        nystrom = None
        if nystrom_cap is not None and X.shape[0] > nystrom_cap:
            nystrom = cvxreg.NystromSpec(nystrom_cap, seed=seed)
        model, _ = fitter(cvxreg.ScalarDataset(X, y), spec, cell["rho"], reg,
                          nystrom=nystrom, tol=tol, max_iters=iters)
        return model

    result = modelselect.grid_search(
        fit, lambda m, X: m.predict(X), modelselect.mse_loss,
        data.X, data.y, cells, folds, seed=seed, refit=False,
    )
    model = fit(data.X, data.y, result.best_cell,
                _budget=(refit_tol, refit_iters))
    return modelselect.CvResult(
        cells=result.cells, mean_loss=result.mean_loss, std_loss=result.std_loss,
        fold_loss=result.fold_loss, best_index=result.best_index,
        best_cell=result.best_cell, model=model, details=result.details,
    )


def fit_krr_cv(data: cvxreg.ScalarDataset, family: str = kernels.GAUSSIAN,
               folds: int = 5, seed: int = 0, cells: list = None) -> modelselect.CvResult:
    cells = krr_grid() if cells is None else cells

    def fit(X, y, cell):
        spec = kernels.KernelSpec(family, float(np.sqrt(cell["sigma2"])))
        return baselines.krr_fit(cvxreg.ScalarDataset(X, y), spec, cell["rho"])

    return modelselect.grid_search(
        fit, lambda m, X: m.predict(X), modelselect.mse_loss,
        data.X, data.y, cells, folds, seed=seed, refit=True,
    )


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------

@dataclass
class BenchmarkConfig:
    dims: tuple = (1, 2)
    noises: tuple = (0.1, 0.3)
    sizes: tuple = (10, 20, 40)
    n_seeds: int = 10
    test_count: int = 10_000
    a: float = 1.0          # oscillation rate of the convex target
    half_width: float = 2.5
    half_widths: dict = None        # optional per-dimension override
    estimators: tuple = ("sos", "krr", "pwl")
    sos_lambda2: tuple = BENCH_LAMBDA2
    sos_rho: tuple = BENCH_RHO
    sos_sigma2: tuple = BENCH_SIGMA2
    krr_rho: tuple = BENCH_KRR_RHO
    krr_sigma2: tuple = BENCH_SIGMA2
    cv_folds: int = 5
    cv_tol: float = 1e-4
    cv_iters: int = 250
    refit_tol: float = 1e-6
    refit_iters: int = 2000
    pwl_iters: int = 6000
    nystrom_cap: int = 25   # compress constraint features above this size
    workers: int = 1
    keep_models: bool = False

    def width(self, dim: int) -> float:
        if self.half_widths and dim in self.half_widths:
            return float(self.half_widths[dim])
        return float(self.half_width)


def _test_cloud(dim: int, cfg: BenchmarkConfig):
    rng = np.random.default_rng(987_000 + dim)
    b = cfg.width(dim)
    X = rng.uniform(-b, b, size=(cfg.test_count, dim))
    return X, datasets.convex_target(X, a=cfg.a)


def _bench_cell(args):
    dim, noise, n, seed, cfg = args
    train = datasets.gen_convex_samples(
        n, p=dim, a=cfg.a, half_width=cfg.width(dim), noise=noise,
        seed=100_000 + 1000 * dim + seed,
    )
    X_test, y_test = _test_cloud(dim, cfg)
    base = {"dim": dim, "noise": noise, "n": n, "seed": seed}
    rows, model_out = [], None
    if "sos" in cfg.estimators:
        res = fit_convex_cv(
            train, folds=cfg.cv_folds, seed=seed, cv_tol=cfg.cv_tol,
            cv_iters=cfg.cv_iters, refit_tol=cfg.refit_tol,
            refit_iters=cfg.refit_iters, nystrom_cap=cfg.nystrom_cap,
            cells=convex_grid(cfg.sos_lambda2, cfg.sos_rho, cfg.sos_sigma2),
        )
        rows.append({**base, "estimator": "sos",
                     "mse": modelselect.mse_loss(res.model.predict(X_test), y_test),
                     **{f"cell_{k}": v for k, v in res.best_cell.items()}})
        model_out = res.model
    if "krr" in cfg.estimators:
        res = fit_krr_cv(train, folds=cfg.cv_folds, seed=seed,
                         cells=krr_grid(cfg.krr_rho, cfg.krr_sigma2))
        rows.append({**base, "estimator": "krr",
                     "mse": modelselect.mse_loss(res.model.predict(X_test), y_test),
                     **{f"cell_{k}": v for k, v in res.best_cell.items()}})
    if "pwl" in cfg.estimators:
        model, _ = baselines.pwl_fit(train, max_iters=cfg.pwl_iters)
        rows.append({**base, "estimator": "pwl",
                     "mse": modelselect.mse_loss(model.predict(X_test), y_test)})
    return base, rows, (model_out if cfg.keep_models else None)


def run_benchmark(cfg: BenchmarkConfig = None):
    """Returns (rows, models): tidy per-run rows and, when ``keep_models``,
    the refit SoS model per (dim, noise, n, seed)."""
    cfg = cfg or BenchmarkConfig()
    tasks = [
        (dim, noise, n, seed, cfg)
        for dim in cfg.dims for noise in cfg.noises
        for n in cfg.sizes for seed in range(cfg.n_seeds)
    ]
    rows, models = [], {}
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_bench_cell, tasks))
    else:
        results = [_bench_cell(t) for t in tasks]
    for base, cell_rows, model in results:
        rows.extend(cell_rows)
        if model is not None:
            models[(base["dim"], base["noise"], base["n"], base["seed"])] = model
    return rows, models


def summarize(rows) -> list:
    """Aggregate per-run rows to (dim, noise, n, estimator) means and stds."""
    groups = {}
    for r in rows:
        groups.setdefault((r["dim"], r["noise"], r["n"], r["estimator"]), []).append(r["mse"])
    out = []
    for (dim, noise, n, est), vals in sorted(groups.items()):
        vals = np.asarray(vals)
        out.append({"dim": dim, "noise": noise, "n": n, "estimator": est,
                    "mean_mse": float(vals.mean()), "std_mse": float(vals.std()),
                    "runs": len(vals)})
    return out
