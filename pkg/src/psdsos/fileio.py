"""Dataset CSV schemas, model files, and report files.

CSV schemas (comma-separated, one header line):

* scalar dataset:   x1,...,xp,y
* matrix dataset:   x1,...,xp,m11,m12,...,mdd   (targets row-major; symmetry
  of each row's matrix is validated on read)
* query points:     x1,...,xp

Model files are JSON documents with a ``format_version`` and a ``kind`` tag
("psd-sos", "convex-sos", "krr", "pwl").  Floats are serialized by Python's
shortest round-trip repr (at most 17 significant digits), which reconstructs
bit-identical float64 values; save -> load -> save is byte-stable.  Gram
factors are not stored: the jitter tau is, and the factor is recomputed as
chol(K + tau I), which is deterministic for fixed inputs.
"""

import csv
import json
import re
from dataclasses import asdict, is_dataclass

import numpy as np

from . import baselines, cvxreg, kernels, psdreg, sosmodel
from .errors import DimensionMismatchError, SymmetryError, ValidationError

FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _check_header(header, path, want_y=None):
    header = [h.strip() for h in header]
    p = 0
    for h in header:
        if re.fullmatch(r"x\d+", h):
            p += 1
        else:
            break
    if p == 0 or [f"x{i+1}" for i in range(p)] != header[:p]:
        raise ValidationError(f"{path}: header must start with x1,...,xp, got {header}")
    rest = header[p:]
    return p, rest


def read_scalar_csv(path) -> cvxreg.ScalarDataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError(f"{path}: empty file")
    p, rest = _check_header(rows[0], path)
    if rest != ["y"]:
        raise ValidationError(f"{path}: expected trailing column 'y', got {rest}")
    body = _float_body(rows[1:], p + 1, path)
    return cvxreg.ScalarDataset(body[:, :p], body[:, p])


def write_scalar_csv(path, data: cvxreg.ScalarDataset):
    p = data.p
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i+1}" for i in range(p)] + ["y"])
        for xi, yi in zip(data.X, data.y):
            w.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])


def read_psd_csv(path) -> psdreg.PsdDataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError(f"{path}: empty file")
    p, rest = _check_header(rows[0], path)
    d = int(round(np.sqrt(len(rest))))
    want = [f"m{a+1}{b+1}" for a in range(d) for b in range(d)]
    if d * d != len(rest) or rest != want:
        raise ValidationError(
            f"{path}: matrix columns must be m11,...,mdd row-major, got {rest}"
        )
    body = _float_body(rows[1:], p + d * d, path)
    M = body[:, p:].reshape(-1, d, d)
    try:
        return psdreg.PsdDataset(body[:, :p], M)
    except SymmetryError as e:
        raise SymmetryError(f"{path}: {e}") from None


def write_psd_csv(path, data: psdreg.PsdDataset):
    p, d = data.X.shape[1], data.d
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            [f"x{i+1}" for i in range(p)]
            + [f"m{a+1}{b+1}" for a in range(d) for b in range(d)]
        )
        for xi, Mi in zip(data.X, data.M):
            w.writerow([repr(float(v)) for v in xi] + [repr(float(v)) for v in Mi.ravel()])


def read_queries_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError(f"{path}: empty file")
    p, rest = _check_header(rows[0], path)
    if rest:
        raise ValidationError(f"{path}: query files carry only x1,...,xp, got extra {rest}")
    return _float_body(rows[1:], p, path)


def _float_body(rows, width, path):
    out = []
    for k, row in enumerate(rows):
        if not row:
            continue
        if len(row) != width:
            raise ValidationError(
                f"{path}: row {k + 2} has {len(row)} fields, expected {width}"
            )
        try:
            out.append([float(v) for v in row])
        except ValueError as e:
            raise ValidationError(f"{path}: row {k + 2}: {e}") from None
    if not out:
        raise ValidationError(f"{path}: no data rows")
    return np.array(out)


def write_predictions_csv(path, preds):
    """Scalar predictions -> column y; matrix predictions -> m11..mdd row-major."""
    preds = np.asarray(preds, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if preds.ndim == 1:
            w.writerow(["y"])
            for v in preds:
                w.writerow([repr(float(v))])
        else:
            d = preds.shape[1]
            w.writerow([f"m{a+1}{b+1}" for a in range(d) for b in range(d)])
            for Mi in preds:
                w.writerow([repr(float(v)) for v in Mi.ravel()])


# ---------------------------------------------------------------------------
# model files
# ---------------------------------------------------------------------------

def _kernel_dict(spec: kernels.KernelSpec):
    return {"family": spec.family, "sigma": spec.sigma}


def _kernel_from(doc):
    return kernels.KernelSpec(doc["family"], doc["sigma"])


def _refactorize(spec, anchors, tau) -> sosmodel.GramFactorization:
    anchors = np.asarray(anchors, dtype=float)
    K = kernels.gram(spec, anchors) + tau * np.eye(anchors.shape[0])
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        raise ValidationError(
            "stored gram matrix is not factorizable with the stored jitter"
        ) from None
    return sosmodel.GramFactorization(spec, anchors, L.T.copy(), float(tau))


def _sos_dict(model: sosmodel.SosModel):
    return {
        "kernel": _kernel_dict(model.kernel),
        "anchors": model.anchors.tolist(),
        "d": model.d,
        "tau": model.fact.tau,
        "B": model.B.tolist(),
        "meta": _to_jsonable(model.meta),
    }


def _sos_from(doc) -> sosmodel.SosModel:
    fact = _refactorize(_kernel_from(doc["kernel"]), doc["anchors"], doc["tau"])
    B = np.asarray(doc["B"], dtype=float)
    d = int(doc["d"])
    if B.shape != (fact.n * d, fact.n * d):
        raise DimensionMismatchError(
            f"model file: B has shape {B.shape}, inconsistent with "
            f"{fact.n} anchors and d={d}"
        )
    return sosmodel.SosModel(fact, d, B, meta=dict(doc.get("meta", {})))


def save_model(path, model):
    if isinstance(model, sosmodel.SosModel):
        doc = {"kind": "psd-sos", **_sos_dict(model)}
    elif isinstance(model, cvxreg.ConvexModel):
        doc = {
            "kind": "convex-sos",
            "variant": model.kind,
            "kernel": _kernel_dict(model.kernel),
            "anchors": model.anchors.tolist(),
            "alpha": model.alpha.tolist(),
            "grid": model.grid.tolist(),
            "rho": model.rho,
            "gamma": None if model.gamma is None else model.gamma.tolist(),
            "sos": _sos_dict(model.sos),
            "meta": _to_jsonable(model.meta),
        }
    elif isinstance(model, baselines.KrrModel):
        doc = {
            "kind": "krr",
            "kernel": _kernel_dict(model.kernel),
            "anchors": model.anchors.tolist(),
            "alpha": model.alpha.tolist(),
            "rho": model.rho,
        }
    elif isinstance(model, baselines.PwlModel):
        doc = {
            "kind": "pwl",
            "anchors": model.anchors.tolist(),
            "theta": model.theta.tolist(),
            "zeta": model.zeta.tolist(),
        }
    else:
        raise ValidationError(f"cannot serialize model of type {type(model).__name__}")
    doc["format_version"] = FORMAT_VERSION
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ValidationError(f"{path}: not a valid model file ({e})") from None
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValidationError(
            f"{path}: unsupported format_version {doc.get('format_version')!r}"
        )
    kind = doc.get("kind")
    if kind == "psd-sos":
        return _sos_from(doc)
    if kind == "convex-sos":
        model = cvxreg.ConvexModel(
            kind=doc["variant"],
            kernel=_kernel_from(doc["kernel"]),
            anchors=np.asarray(doc["anchors"], dtype=float),
            alpha=np.asarray(doc["alpha"], dtype=float),
            grid=np.asarray(doc["grid"], dtype=float),
            sos=_sos_from(doc["sos"]),
            rho=float(doc["rho"]),
            gamma=None if doc["gamma"] is None else np.asarray(doc["gamma"], dtype=float),
            meta=dict(doc.get("meta", {})),
        )
        if model.kind not in ("approx", "exact"):
            raise ValidationError(f"{path}: unknown variant {model.kind!r}")
        if model.kind == "exact" and model.gamma is None:
            raise ValidationError(f"{path}: exact-variant model requires gamma")
        return model
    if kind == "krr":
        return baselines.KrrModel(
            _kernel_from(doc["kernel"]),
            np.asarray(doc["anchors"], dtype=float),
            np.asarray(doc["alpha"], dtype=float),
            float(doc["rho"]),
        )
    if kind == "pwl":
        return baselines.PwlModel(
            np.asarray(doc["anchors"], dtype=float),
            np.asarray(doc["theta"], dtype=float),
            np.asarray(doc["zeta"], dtype=float),
        )
    raise ValidationError(f"{path}: unknown model kind {kind!r}")


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def _to_jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return _to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def save_report(path, report):
    with open(path, "w") as fh:
        json.dump(_to_jsonable(report), fh, indent=1, sort_keys=True)
        fh.write("\n")
