"""Command-line interface: ``gltsvm <subcommand> [options]``.

Exit codes: 0 success, 2 bad arguments, 3 data errors, 4 solver failure.
Every run that writes files also writes ``<output>.manifest.json`` holding
the argument vector, resolved configuration and library versions;
``gltsvm replay <manifest>`` re-executes it.
"""

import argparse
import hashlib
import json
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .data import load_csv, load_features_csv, minmax_scale, split_by_class, stratified_kfold
from .errors import (
    DegenerateModelError,
    DivergenceError,
    InvalidArgumentError,
    InvalidDatasetError,
    ParseError,
)
from .evaluation import GridSpec, cross_validate, grid_search, read_results_csv, render_table
from .kernels import KernelSpec
from .losses import LOSS_KINDS, LossSpec, loss_curve
from .model import load_model, predict_batch, save_model, write_atomic
from .solver import HyperParams, fit

log = logging.getLogger("gltsvm")

EXIT_ARGS, EXIT_DATA, EXIT_SOLVER = 2, 3, 4


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(f"{self.prog}: error: {message}", EXIT_ARGS)


def _floats(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated reals, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _add_data(p, required=True):
    p.add_argument("--data", required=required, help="input CSV")
    p.add_argument("--label-col", default="last", help="label column: index, header name or 'last'")
    p.add_argument("--positive-label", default=None, help="raw label value mapped to +1")
    p.add_argument("--no-scale", action="store_true", help="disable min-max feature scaling")


def _add_hp(p):
    p.add_argument("--c", type=float, default=None, help="shorthand setting c1..c4 at once")
    for name in ("c1", "c2", "c3", "c4"):
        p.add_argument(f"--{name}", type=float, default=None)
    p.add_argument("--a", type=float, default=1.0, help="guardian loss shape (default 1)")
    p.add_argument("--kernel", choices=("linear", "rbf"), default="linear")
    p.add_argument("--gamma", type=float, default=1.0, help="rbf width (default 1)")
    p.add_argument("--eta", type=float, default=1e-5, help="convergence precision")
    p.add_argument("--max-iter", type=int, default=100, help="iteration cap per subproblem")


def _add_out(p, required=False):
    p.add_argument("--out", required=required, help="output path")
    p.add_argument("--stdout", action="store_true", help="write the primary output to stdout")
    p.add_argument("--manifest", default=None, help="manifest path (default <out>.manifest.json)")


def build_parser():
    parser = _Parser(prog="gltsvm", description="Guardian-loss twin SVM toolkit")
    parser.add_argument("--version", action="version", version=f"gltsvm {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="fit a model on a labeled CSV")
    _add_data(p)
    _add_hp(p)
    p.add_argument("--seed", type=int, default=0, help="recorded in the manifest")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--report", default=None, help="report path (default <out stem>.report.txt)")
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("predict", help="label the rows of a CSV with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="feature CSV")
    p.add_argument("--label-col", default=None, help="column to drop before predicting")
    _add_out(p)

    p = sub.add_parser("gridsearch", help="cross-validated hyperparameter search")
    _add_data(p)
    p.add_argument("--kernel", choices=("linear", "rbf"), default="linear")
    p.add_argument("--c-values", type=_floats, default=None, help="grid for c1 = c3")
    p.add_argument("--penalty-values", type=_floats, default=None, help="grid for c2 = c4")
    p.add_argument("--tie-all", action="store_true", help="use one C for all four constants")
    p.add_argument("--a-values", type=_floats, default=None)
    p.add_argument("--gamma-values", type=_floats, default=None)
    p.add_argument("--eta", type=float, default=1e-5)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="best-parameter JSON file")
    p.add_argument("--results", default=None, help="per-cell CSV (default <out stem>.results.csv)")
    p.add_argument("--manifest", default=None)

    p = sub.add_parser("losscurve", help="tabulate a loss function")
    p.add_argument("--loss", default="guardian", help=f"one of {', '.join(LOSS_KINDS)}")
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--r-min", type=float, default=-3.0)
    p.add_argument("--r-max", type=float, default=3.0)
    p.add_argument("--step", type=float, default=0.01)
    _add_out(p)

    p = sub.add_parser("noise-bench", aliases=["noisebench"], help="accuracy under training-label noise")
    _add_data(p)
    _add_hp(p)
    p.add_argument("--fractions", type=_floats, default=[0.0, 0.05, 0.1, 0.15, 0.2])
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    _add_out(p)

    p = sub.add_parser("table", help="render a dataset,model,accuracy CSV as a ranked table")
    p.add_argument("--results", required=True)
    _add_out(p)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    return parser


def _hyperparams(args):
    base = args.c if args.c is not None else 1.0
    cs = {n: getattr(args, n) if getattr(args, n) is not None else base for n in ("c1", "c2", "c3", "c4")}
    kernel = KernelSpec("rbf", args.gamma) if args.kernel == "rbf" else None
    return HyperParams(**cs, a=args.a, kernel=kernel, eta=args.eta, max_iter=args.max_iter)


def _load_dataset(args):
    try:
        return load_csv(args.data, args.label_col, args.positive_label)
    except (ParseError, InvalidDatasetError, OSError) as exc:
        raise CliError(f"cannot load {args.data}: {exc}", EXIT_DATA) from None
    except InvalidArgumentError as exc:
        raise CliError(str(exc), EXIT_ARGS) from None


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions():
    return {
        "gltsvm": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def _manifest_path(args, primary):
    if getattr(args, "manifest", None):
        return args.manifest
    if primary is None:
        return None
    return str(primary) + ".manifest.json"


def _write_manifest(args, argv, primary, outputs, inputs, extra=None):
    path = _manifest_path(args, primary)
    if path is None:
        return
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "config": config,
        "seed": config.get("seed"),
        "inputs": {p: _sha256(p) for p in inputs},
        "outputs": list(outputs),
        "versions": _versions(),
    }
    if extra:
        manifest.update(extra)
    write_atomic(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _emit(args, text):
    """Write the primary output; returns the path written, or None for stdout."""
    if args.stdout or not args.out:
        sys.stdout.write(text)
        sys.stdout.flush()
        return None
    write_atomic(args.out, text)
    return args.out


def _num(x):
    # shortest decimal that round-trips to the same double
    return repr(float(x))


def _with_suffix(path, suffix):
    p = Path(path)
    return str(p.with_suffix(suffix)) if p.suffix else str(p) + suffix


def cmd_train(args, argv):
    try:
        hp = _hyperparams(args)
    except InvalidArgumentError as exc:
        raise CliError(str(exc), EXIT_ARGS) from None
    ds = _load_dataset(args)
    try:
        X_plus, X_minus = split_by_class(ds)
    except InvalidDatasetError as exc:
        raise CliError(f"{args.data}: {exc}", EXIT_DATA) from None
    scaling = None
    if not args.no_scale:
        ds, _, scaling = minmax_scale(ds)
        X_plus, X_minus = split_by_class(ds)
    started = time.perf_counter()
    try:
        model, report = fit(X_plus, X_minus, hp)
        object.__setattr__(model, "scaling", scaling)
        model.check()
    except (DivergenceError, DegenerateModelError) as exc:
        raise CliError(f"training failed: {exc}", EXIT_SOLVER) from None
    wall = time.perf_counter() - started

    report_txt = args.report or _with_suffix(args.out, ".report.txt")
    report_csv = _with_suffix(report_txt, ".csv") if report_txt.endswith(".txt") else report_txt + ".csv"
    save_model(model, args.out)
    lp, lm = X_plus.shape[0], X_minus.shape[0]
    lines = [
        "gltsvm training report",
        f"data: {args.data}",
        f"samples: {lp + lm} ({lp} positive, {lm} negative), features: {ds.n_features}",
        f"model: {'kernel (' + hp.kernel.kind + ')' if hp.kernel else 'linear'}",
        "hyperparameters: " + ", ".join(f"{k}={v}" for k, v in hp.as_dict().items()),
        f"scaling: {'min-max' if scaling is not None else 'none'}",
    ]
    for side, rep in (("positive", report.positive), ("negative", report.negative)):
        lines.append(
            f"{side}: iterations={rep.iterations} residual={rep.final_residual:.6g} "
            f"grad_norm={rep.grad_norm:.6g} converged={str(rep.converged).lower()}"
        )
    lines.append(f"wall_time_s: {wall:.6f}")
    write_atomic(report_txt, "\n".join(lines) + "\n")
    buf = ["subproblem,iterations,final_residual,grad_norm,converged"]
    for side, rep in (("positive", report.positive), ("negative", report.negative)):
        buf.append(
            f"{side},{rep.iterations},{_num(rep.final_residual)},{_num(rep.grad_norm)},"
            f"{str(rep.converged).lower()}"
        )
    write_atomic(report_csv, "\n".join(buf) + "\n")
    if not report.converged:
        log.warning("fixed point not reached within %d iterations; model saved anyway", hp.max_iter)
    _write_manifest(args, argv, args.out, [args.out, report_txt, report_csv], [args.data])
    return 0


def cmd_predict(args, argv):
    try:
        model = load_model(args.model)
    except (ParseError, OSError) as exc:
        raise CliError(f"cannot load model {args.model}: {exc}", EXIT_DATA) from None
    try:
        X, _ = load_features_csv(args.data, drop_column=args.label_col)
    except (ParseError, OSError) as exc:
        raise CliError(f"cannot load {args.data}: {exc}", EXIT_DATA) from None
    except InvalidArgumentError as exc:
        raise CliError(str(exc), EXIT_ARGS) from None
    if X.shape[0] and X.shape[1] != model.n_features:
        raise CliError(
            f"{args.data} has {X.shape[1]} feature columns, model expects {model.n_features}",
            EXIT_DATA,
        )
    try:
        labels = predict_batch(model, X) if X.shape[0] else np.zeros(0, dtype=int)
    except DegenerateModelError as exc:
        raise CliError(str(exc), EXIT_SOLVER) from None
    text = "index,label\n" + "".join(f"{i},{int(v)}\n" for i, v in enumerate(labels))
    primary = _emit(args, text)
    _write_manifest(args, argv, primary, [primary] if primary else [], [args.model, args.data])
    return 0


def _grid(args):
    kwargs = dict(kernel=args.kernel, tie_all=args.tie_all, eta=args.eta, max_iter=args.max_iter)
    if args.c_values is not None:
        kwargs["c_values"] = args.c_values
    if args.penalty_values is not None:
        kwargs["penalty_values"] = args.penalty_values
    if args.a_values is not None:
        kwargs["a_values"] = args.a_values
    if args.gamma_values is not None:
        kwargs["gamma_values"] = args.gamma_values
    return GridSpec(**kwargs)


def cmd_gridsearch(args, argv):
    try:
        grid = _grid(args)
        if args.folds < 2:
            raise InvalidArgumentError("--folds must be at least 2")
        if args.eta <= 0 or args.max_iter < 1:
            raise InvalidArgumentError("--eta must be positive and --max-iter at least 1")
    except InvalidArgumentError as exc:
        raise CliError(str(exc), EXIT_ARGS) from None
    ds = _load_dataset(args)
    try:
        plan = stratified_kfold(ds, args.folds, args.seed)
    except InvalidArgumentError as exc:
        raise CliError(f"{args.data}: {exc}", EXIT_DATA) from None
    try:
        result = grid_search(ds, grid, plan=plan, scale=not args.no_scale, n_jobs=args.jobs)
    except DivergenceError as exc:
        raise CliError(f"grid search failed: {exc}", EXIT_SOLVER) from None
    except InvalidArgumentError as exc:
        raise CliError(f"{args.data}: {exc}", EXIT_DATA) from None

    best = result.best.as_dict()
    best["cv_accuracy"] = result.best_accuracy
    best["folds"] = args.folds
    best["seed"] = args.seed
    results_path = args.results or _with_suffix(args.out, ".results.csv")
    rows = ["c1,c2,c3,c4,a,gamma,mean_accuracy,std_accuracy,converged_folds"]
    for cell in result.results:
        d = cell.hp.as_dict()
        gamma = "" if d["gamma"] is None else _num(d["gamma"])
        rows.append(
            ",".join(_num(d[k]) for k in ("c1", "c2", "c3", "c4", "a"))
            + f",{gamma},{_num(cell.mean)},{_num(cell.std)},{cell.converged_folds}"
        )
    write_atomic(results_path, "\n".join(rows) + "\n")
    write_atomic(args.out, json.dumps(best, indent=2, sort_keys=True) + "\n")
    _write_manifest(args, argv, args.out, [args.out, results_path], [args.data])
    return 0


def cmd_losscurve(args, argv):
    try:
        spec = LossSpec(args.loss, a=args.a, tau=args.tau, theta=args.theta, rho=args.rho, lam=args.lam)
        rows = loss_curve(spec, args.r_min, args.r_max, args.step)
    except InvalidArgumentError as exc:
        raise CliError(str(exc), EXIT_ARGS) from None
    text = "r,loss\n" + "".join(f"{r:.9g},{v:.9g}\n" for r, v in rows)
    primary = _emit(args, text)
    _write_manifest(args, argv, primary, [primary] if primary else [], [])
    return 0


def cmd_noise_bench(args, argv):
    try:
        hp = _hyperparams(args)
        fractions = sorted(set(args.fractions))
        if any(not (0.0 <= f <= 1.0) for f in fractions):
            raise InvalidArgumentError("noise fractions must lie in [0, 1]")
        if args.folds < 2:
            raise InvalidArgumentError("--folds must be at least 2")
    except InvalidArgumentError as exc:
        raise CliError(str(exc), EXIT_ARGS) from None
    ds = _load_dataset(args)
    try:
        plan = stratified_kfold(ds, args.folds, args.seed)
        rows = ["fraction,mean_accuracy,std"]
        for f in fractions:
            res = cross_validate(ds, hp, plan, scale=not args.no_scale, train_noise=(f, args.seed))
            rows.append(f"{_num(f)},{_num(res.mean)},{_num(res.std)}")
    except InvalidArgumentError as exc:
        raise CliError(f"{args.data}: {exc}", EXIT_DATA) from None
    except (DivergenceError, DegenerateModelError) as exc:
        raise CliError(f"noise benchmark failed: {exc}", EXIT_SOLVER) from None
    primary = _emit(args, "\n".join(rows) + "\n")
    _write_manifest(args, argv, primary, [primary] if primary else [], [args.data])
    return 0


def cmd_table(args, argv):
    try:
        table = read_results_csv(args.results)
    except (InvalidDatasetError, InvalidArgumentError, OSError) as exc:
        raise CliError(f"cannot read {args.results}: {exc}", EXIT_DATA) from None
    primary = _emit(args, render_table(table))
    _write_manifest(args, argv, primary, [primary] if primary else [], [args.results])
    return 0


def cmd_replay(args, argv):
    try:
        with open(args.manifest, encoding="utf-8") as fh:
            manifest = json.load(fh)
        recorded = manifest["argv"]
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot read manifest {args.manifest}: {exc}", EXIT_DATA) from None
    if manifest.get("versions") != _versions():
        log.warning("library versions differ from the recorded run; outputs may not match bitwise")
    return main(recorded)


COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "gridsearch": cmd_gridsearch,
    "losscurve": cmd_losscurve,
    "noise-bench": cmd_noise_bench,
    "noisebench": cmd_noise_bench,
    "table": cmd_table,
    "replay": cmd_replay,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliError as exc:
        print(exc, file=sys.stderr)
        return exc.code
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    if args.command == "noisebench":
        args.command = "noise-bench"
    try:
        return COMMANDS[args.command](args, argv)
    except CliError as exc:
        print(f"gltsvm {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
