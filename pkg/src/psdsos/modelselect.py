"""k-fold cross-validation and grid search over hyperparameter cells.

The search protocol is deliberately functional: a cell is a plain dict of
hyperparameters, and the caller supplies

    fit_fn(X_train, Y_train, cell)   -> fitted model
    predict_fn(model, X)             -> predictions
    loss_fn(predictions, Y)          -> scalar validation loss

Cells are scored by mean validation loss across folds; a cell whose fit or
prediction raises scores +inf instead of aborting the search.  Ties go to the
earliest cell, so callers order their grids most-regularized first.  The
winning cell is refit on the full data.
"""

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import ValidationError


def kfold_indices(n: int, k: int, seed: int = 0):
    """Deterministic shuffled k-fold split; fold sizes differ by at most 1.

    Returns a list of (train_idx, val_idx) pairs.  k = n gives leave-one-out.
    """
    if not 2 <= k <= n:
        raise ValidationError(f"need 2 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    folds = np.array_split(perm, k)
    out = []
    for i, val in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        out.append((np.sort(train), np.sort(val)))
    return out


def cells_from_axes(axes: dict) -> list:
    """Cartesian product of {name: [values]} into a list of cell dicts.

    Axis values are used in the given order; put the most-regularized value
    first so that tie-breaking prefers stronger regularization.
    """
    names = list(axes)
    return [dict(zip(names, combo)) for combo in product(*(axes[k] for k in names))]


@dataclass
class CvResult:
    cells: list
    mean_loss: np.ndarray  # (n_cells,)
    std_loss: np.ndarray  # (n_cells,)
    fold_loss: np.ndarray  # (n_cells, k)
    best_index: int
    best_cell: dict
    model: object = None  # refit on full data, when requested
    details: dict = field(default_factory=dict)


def mse_loss(pred, Y) -> float:
    pred = np.asarray(pred, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return float(np.mean((pred - Y) ** 2))


def frobenius_loss(pred, Y) -> float:
    """Mean squared Frobenius error for (m, d, d) stacks."""
    diff = np.asarray(pred, dtype=float) - np.asarray(Y, dtype=float)
    return float(np.mean(np.sum(diff * diff, axis=(1, 2))))


def grid_search(
    fit_fn, predict_fn, loss_fn, X, Y, cells, n_folds: int, seed: int = 0,
    refit: bool = True,
) -> CvResult:
    X = np.asarray(X)
    Y = np.asarray(Y)
    n = X.shape[0]
    if not cells:
        raise ValidationError("empty hyperparameter grid")
    folds = kfold_indices(n, n_folds, seed=seed)
    fold_loss = np.full((len(cells), len(folds)), np.inf)
    for ci, cell in enumerate(cells):
        for fi, (tr, va) in enumerate(folds):
            try:
                model = fit_fn(X[tr], Y[tr], cell)
                fold_loss[ci, fi] = float(loss_fn(predict_fn(model, X[va]), Y[va]))
            except Exception:
                fold_loss[ci, fi] = np.inf  # failed cells lose, search continues
    with np.errstate(invalid="ignore"):  # std over an all-inf row is nan
        mean = fold_loss.mean(axis=1)
        std = fold_loss.std(axis=1)
    best = int(np.argmin(mean))  # argmin takes the first minimum: grid order breaks ties
    if not np.isfinite(mean[best]):
        raise ValidationError("every hyperparameter cell failed during cross-validation")
    model = None
    if refit:
        model = fit_fn(X, Y, cells[best])
    return CvResult(
        cells=list(cells),
        mean_loss=mean,
        std_loss=std,
        fold_loss=fold_loss,
        best_index=best,
        best_cell=dict(cells[best]),
        model=model,
        details={"n_folds": len(folds), "seed": seed},
    )
