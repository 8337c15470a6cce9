"""Command-line front end.

Subcommands: gen, fit-psd, fit-convex, predict, certify, cv, benchmark.
Every numeric flag can also be set through an environment variable with the
``PSDSOS_`` prefix (flag ``--max-iters`` -> ``PSDSOS_MAX_ITERS``); explicit
flags win.  Exit codes: 0 success, 1 input/usage error, 2 solver reached its
iteration budget without converging, 3 certificate precondition violated.
"""

import argparse
import csv
import os
import sys

import numpy as np

from . import baselines, certify, cvxreg, datasets, experiments, fileio, kernels, \
    psdreg, sosmodel
from .errors import PsdSosError, ValidationError

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NO_CONVERGENCE = 2
EXIT_CERTIFICATE = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse would sys.exit(2); route usage problems to exit code 1 instead
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _env(name, cast, fallback):
    var = "PSDSOS_" + name.upper().replace("-", "_")
    raw = os.environ.get(var)
    if raw is None:
        return fallback
    try:
        return cast(raw)
    except ValueError:
        raise _UsageError(f"environment variable {var}: cannot parse {raw!r}") from None


def _add_solver_flags(p):
    p.add_argument("--tol", type=float, default=_env("tol", float, 1e-8))
    p.add_argument("--max-iters", type=int, default=_env("max-iters", int, 50_000))


def _add_kernel_flags(p):
    p.add_argument("--kernel", choices=sorted(kernels.FAMILIES),
                   default=_env("kernel", str, "gaussian"))
    p.add_argument("--sigma", type=float, default=_env("sigma", float, None))


def build_parser() -> argparse.ArgumentParser:
    root = _Parser(prog="psdsos", description=__doc__,
                   formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = root.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate example datasets")
    p.add_argument("kind", choices=["bures", "convex"])
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--half-width", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=_env("seed", int, 0))

    p = sub.add_parser("fit-psd", help="fit a PSD-matrix-valued regressor")
    p.add_argument("--data", required=True)
    _add_kernel_flags(p)
    p.add_argument("--lambda1", type=float, default=_env("lambda1", float, 0.0))
    p.add_argument("--lambda2", type=float, default=_env("lambda2", float, 1e-4),
                   help="must be positive; the hard-constrained limit has no solver")
    _add_solver_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--report")

    p = sub.add_parser("fit-convex", help="fit a convex scalar regressor")
    p.add_argument("--data", required=True)
    _add_kernel_flags(p)
    p.add_argument("--variant", choices=["approx", "exact"], default="approx")
    p.add_argument("--rho", type=float, default=_env("rho", float, 1e-5))
    p.add_argument("--lambda1", type=float, default=_env("lambda1", float, 0.0))
    p.add_argument("--lambda2", type=float, default=_env("lambda2", float, 1e-4))
    p.add_argument("--grid-file", default=_env("grid-file", str, None),
                   help="constraint points CSV (default: the training inputs)")
    p.add_argument("--nystrom-rank", type=int,
                   default=_env("nystrom-rank", int, None))
    p.add_argument("--seed", type=int, default=_env("seed", int, 0))
    _add_solver_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--certificate",
                   help="also write a convexity-deficit certificate here")
    p.add_argument("--sobolev-s", type=float,
                   help="derive certificate constants from a Sobolev order")
    p.add_argument("--const-m", type=float, help="user-supplied constant M")
    p.add_argument("--const-d", type=float, help="user-supplied constant D_m")

    p = sub.add_parser("predict", help="evaluate a saved model on query points")
    p.add_argument("--model", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("certify", help="eigenvalue lower bound for a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--low", type=float, required=True, help="box lower corner (per axis)")
    p.add_argument("--high", type=float, required=True, help="box upper corner (per axis)")
    p.add_argument("--order", type=int, default=1, help="differentiability order m")
    p.add_argument("--domain-radius", type=float, default=None,
                   help="default: covering-ball radius of the box")
    p.add_argument("--sobolev-s", type=float)
    p.add_argument("--const-m", type=float)
    p.add_argument("--const-d", type=float)
    p.add_argument("--form", choices=["trace", "lambda-max"], default="trace")
    p.add_argument("--fd-step", type=float, default=1e-4)
    p.add_argument("--probes", type=int, default=None)
    p.add_argument("--seed", type=int, default=_env("seed", int, 0))
    p.add_argument("--out", required=True)

    p = sub.add_parser("cv", help="grid-search hyperparameters, refit on all data")
    p.add_argument("--data", required=True)
    p.add_argument("--task", choices=["psd", "convex"], required=True)
    p.add_argument("--kernel", choices=sorted(kernels.FAMILIES), default=None,
                   help="kernel family (default: exponential for psd, gaussian for convex)")
    p.add_argument("--variant", choices=["approx", "exact"], default="approx")
    p.add_argument("--folds", type=int, default=None,
                   help="default: leave-one-out for psd, 5 for convex")
    p.add_argument("--nystrom-rank", type=int,
                   default=_env("nystrom-rank", int, None))
    p.add_argument("--seed", type=int, default=_env("seed", int, 0))
    p.add_argument("--out", required=True)
    p.add_argument("--report")

    p = sub.add_parser("benchmark",
                       help="compare SoS / ridge / piecewise-linear regressors")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--dims", default="1,2")
    p.add_argument("--noises", default="0.1,0.3")
    p.add_argument("--sizes", default="10,20,40")
    p.add_argument("--n-seeds", type=int, default=10)
    p.add_argument("--test-count", type=int, default=10_000)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--half-width", type=float, default=2.5)
    p.add_argument("--estimators", default="sos,krr,pwl")
    p.add_argument("--workers", type=int, default=_env("workers", int, 1))

    return root


# ---------------------------------------------------------------------------
# subcommand bodies
# ---------------------------------------------------------------------------

def _cmd_gen(args) -> int:
    if args.kind == "bures":
        data = datasets.bures_dataset(n=args.n)
        fileio.write_psd_csv(args.out, data)
    else:
        data = datasets.gen_convex_samples(
            args.n, p=args.dim, a=args.a, half_width=args.half_width,
            noise=args.noise, seed=args.seed,
        )
        fileio.write_scalar_csv(args.out, data)
    print(f"wrote {args.n} rows to {args.out}")
    return EXIT_OK


def _kernel_spec(args) -> kernels.KernelSpec:
    if args.sigma is None:
        raise _UsageError("--sigma is required")
    return kernels.KernelSpec(args.kernel, args.sigma)


def _cmd_fit_psd(args) -> int:
    data = fileio.read_psd_csv(args.data)
    spec = _kernel_spec(args)
    reg = sosmodel.RegularizerSpec(args.lambda1, args.lambda2)
    model, report = psdreg.solve(data, spec, reg, tol=args.tol,
                                 max_iters=args.max_iters)
    fileio.save_model(args.out, model)
    if args.report:
        fileio.save_report(args.report, report)
    print(f"primal {report.primal:.6e}  gap {report.gap:.3e}  "
          f"iterations {report.iterations}  converged {report.converged}")
    return EXIT_OK if report.converged else EXIT_NO_CONVERGENCE


def _certificate_constants(args, p: int, order: int):
    if args.sobolev_s is not None:
        return certify.sobolev_constants(args.sobolev_s, p, order)
    if args.const_m is not None or args.const_d is not None:
        if args.const_m is None or args.const_d is None:
            raise _UsageError("--const-m and --const-d must be given together")
        return certify.SmoothnessConstants(args.const_m, args.const_d,
                                           order, source=certify.USER)
    return None


def _cmd_fit_convex(args) -> int:
    data = fileio.read_scalar_csv(args.data)
    spec = _kernel_spec(args)
    reg = sosmodel.RegularizerSpec(args.lambda1, args.lambda2)
    grid = None
    if args.grid_file:
        grid = fileio.read_queries_csv(args.grid_file)
    nystrom = None
    if args.nystrom_rank is not None:
        nystrom = cvxreg.NystromSpec(args.nystrom_rank, seed=args.seed)
    fitter = cvxreg.fit_approx if args.variant == "approx" else cvxreg.fit_exact
    model, report = fitter(data, spec, args.rho, reg, grid=grid,
                           nystrom=nystrom, tol=args.tol, max_iters=args.max_iters)
    fileio.save_model(args.out, model)
    if args.report:
        fileio.save_report(args.report, report)
    print(f"primal {report.primal:.6e}  gap {report.gap:.3e}  "
          f"iterations {report.iterations}  converged {report.converged}")
    code = EXIT_OK if report.converged else EXIT_NO_CONVERGENCE
    constants = _certificate_constants(args, data.p, 1)
    if args.certificate:
        if constants is None:
            raise _UsageError("--certificate needs --sobolev-s or --const-m/--const-d")
        low, high = float(data.X.min()), float(data.X.max())
        cert = certify.convexity_deficit(
            lambda x: model.hessians(np.atleast_2d(x))[0],
            float(np.trace(model.sos.B)), model.grid, constants,
            low, high, data.p, domain_radius=(high - low) / 2 * np.sqrt(data.p),
            seed=args.seed,
        )
        fileio.save_report(args.certificate, cert)
        print(f"convexity deficit {cert.eps:.6e}  valid {cert.valid}")
        if code == EXIT_OK and not cert.valid:
            code = EXIT_CERTIFICATE
    return code


def _cmd_predict(args) -> int:
    model = fileio.load_model(args.model)
    X = fileio.read_queries_csv(args.queries)
    if isinstance(model, sosmodel.SosModel):
        preds = model.evaluate_batch(X)
    else:
        preds = model.predict(X)
    fileio.write_predictions_csv(args.out, preds)
    print(f"wrote {len(X)} predictions to {args.out}")
    return EXIT_OK


def _cmd_certify(args) -> int:
    model = fileio.load_model(args.model)
    if isinstance(model, sosmodel.SosModel):
        p = model.anchors.shape[1]
        field = lambda x: model(x)
        trace_B = float(np.trace(model.B))
        samples = model.anchors
    elif isinstance(model, cvxreg.ConvexModel):
        p = model.anchors.shape[1]
        field = lambda x: model.hessians(np.atleast_2d(x))[0]
        trace_B = float(np.trace(model.sos.B))
        samples = model.grid
    else:
        raise ValidationError(
            "certificates apply to psd-sos and convex-sos models only"
        )
    constants = _certificate_constants(args, p, args.order)
    if constants is None:
        raise _UsageError("supply --sobolev-s or --const-m/--const-d")
    radius = args.domain_radius
    if radius is None:
        radius = (args.high - args.low) / 2 * np.sqrt(p)
    report = certify.matrix_certificate(
        field, trace_B, samples, constants, args.low, args.high, p,
        domain_radius=radius, fd_step=args.fd_step, form=args.form,
        probes=args.probes, seed=args.seed,
    )
    fileio.save_report(args.out, report)
    print(f"eps {report.eps:.6e}  fill distance {report.h:.4e}  "
          f"threshold {report.threshold:.4e}  valid {report.valid}")
    return EXIT_OK if report.valid else EXIT_CERTIFICATE


def _cv_report_doc(result) -> dict:
    return {
        "cells": result.cells,
        "mean_loss": result.mean_loss,
        "std_loss": result.std_loss,
        "fold_loss": result.fold_loss,
        "best_index": result.best_index,
        "best_cell": result.best_cell,
    }


def _cmd_cv(args) -> int:
    if args.task == "psd":
        data = fileio.read_psd_csv(args.data)
        family = args.kernel or kernels.EXPONENTIAL
        result = experiments.fit_psd_cv(data, family=family, folds=args.folds,
                                        seed=args.seed)
    else:
        data = fileio.read_scalar_csv(args.data)
        family = args.kernel or kernels.GAUSSIAN
        result = experiments.fit_convex_cv(
            data, family=family, folds=args.folds or 5, seed=args.seed,
            variant=args.variant, nystrom_cap=args.nystrom_rank,
        )
    fileio.save_model(args.out, result.model)
    if args.report:
        fileio.save_report(args.report, _cv_report_doc(result))
    print(f"selected {result.best_cell}  "
          f"validation loss {result.mean_loss[result.best_index]:.6e}")
    return EXIT_OK


_PLOT_SCRIPT = """\
#!/usr/bin/env python3
\"\"\"Render the benchmark summary produced alongside this script.\"\"\"
import csv
from collections import defaultdict

import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("summary.csv")))
dims = sorted({int(r["dim"]) for r in rows})
noises = sorted({float(r["noise"]) for r in rows})
fig, axes = plt.subplots(len(dims), len(noises),
                         figsize=(5 * len(noises), 4 * len(dims)), squeeze=False)
for i, dim in enumerate(dims):
    for j, eta in enumerate(noises):
        ax = axes[i][j]
        series = defaultdict(list)
        for r in rows:
            if int(r["dim"]) == dim and float(r["noise"]) == eta:
                series[r["estimator"]].append(
                    (int(r["n"]), float(r["mean_mse"]), float(r["std_mse"])))
        for est, pts in sorted(series.items()):
            pts.sort()
            ns = [p[0] for p in pts]
            ax.errorbar(ns, [p[1] for p in pts], yerr=[p[2] for p in pts],
                        marker="o", capsize=3, label=est)
        ax.set_xscale("log"); ax.set_yscale("log")
        ax.set_xticks([p[0] for p in pts], [str(p[0]) for p in pts])
        ax.set_xlabel("training samples"); ax.set_ylabel("test MSE")
        ax.set_title(f"dim={dim}, noise={eta}")
        ax.legend()
fig.tight_layout()
fig.savefig("benchmark.png", dpi=150)
print("wrote benchmark.png")
"""


def _parse_list(raw, cast):
    try:
        return tuple(cast(v) for v in str(raw).split(",") if v != "")
    except ValueError:
        raise _UsageError(f"cannot parse list {raw!r}") from None


def _cmd_benchmark(args) -> int:
    cfg = experiments.BenchmarkConfig(
        dims=_parse_list(args.dims, int),
        noises=_parse_list(args.noises, float),
        sizes=_parse_list(args.sizes, int),
        n_seeds=args.n_seeds,
        test_count=args.test_count,
        a=args.a,
        half_width=args.half_width,
        estimators=_parse_list(args.estimators, str),
        workers=args.workers,
    )
    rows, _ = experiments.run_benchmark(cfg)
    summary = experiments.summarize(rows)
    os.makedirs(args.out_dir, exist_ok=True)
    run_cols = sorted({k for r in rows for k in r})
    with open(os.path.join(args.out_dir, "runs.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=run_cols)
        w.writeheader()
        w.writerows(rows)
    with open(os.path.join(args.out_dir, "summary.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(summary[0]))
        w.writeheader()
        w.writerows(summary)
    with open(os.path.join(args.out_dir, "plot_results.py"), "w") as fh:
        fh.write(_PLOT_SCRIPT)
    for row in summary:
        print(f"dim={row['dim']} noise={row['noise']} n={row['n']:>3} "
              f"{row['estimator']:>4}: mse {row['mean_mse']:.5f} "
              f"+/- {row['std_mse']:.5f}")
    print(f"wrote runs.csv, summary.csv, plot_results.py to {args.out_dir}")
    return EXIT_OK


_COMMANDS = {
    "gen": _cmd_gen,
    "fit-psd": _cmd_fit_psd,
    "fit-convex": _cmd_fit_convex,
    "predict": _cmd_predict,
    "certify": _cmd_certify,
    "cv": _cmd_cv,
    "benchmark": _cmd_benchmark,
}


def main(argv=None) -> int:
    try:
        # built inside the guard: env-var defaults are parsed here too
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.subcommand](args)
    except _UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_INPUT
    except (PsdSosError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
