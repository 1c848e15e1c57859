"""Accuracy, cross-validation, grid search and benchmark tables."""

import csv
import io
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import FoldPlan, inject_label_noise, minmax_scale, split_by_class, stratified_kfold
from .errors import InvalidArgumentError, InvalidDatasetError
from .kernels import KernelSpec, build_linear_design, gram
from .model import predict_batch
from .solver import HyperParams, fit, kernel_design, solve_batch, transfer_matrix

__all__ = [
    "accuracy",
    "CVResult",
    "cross_validate",
    "holdout_accuracy",
    "GridSpec",
    "CellResult",
    "GridSearchResult",
    "grid_search",
    "rank_row",
    "BenchmarkTable",
    "build_benchmark_table",
    "render_table",
    "read_results_csv",
    "write_results_csv",
]

log = logging.getLogger(__name__)


def accuracy(predicted, actual):
    """Percentage of positions where ``predicted`` equals ``actual``."""
    predicted = np.asarray(predicted).ravel()
    actual = np.asarray(actual).ravel()
    if predicted.size == 0 or predicted.size != actual.size:
        raise InvalidArgumentError(
            f"need equal, non-zero lengths; got {predicted.size} and {actual.size}"
        )
    return 100.0 * float(np.count_nonzero(predicted == actual)) / predicted.size


@dataclass(frozen=True)
class CVResult:
    mean: float
    fold_accuracies: tuple
    std: float
    scalers: tuple = field(default=(), repr=False)


def _summary(accs):
    accs = tuple(float(a) for a in accs)
    mean = math.fsum(accs) / len(accs)
    std = float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0
    return mean, accs, std


def _prepare_fold(ds, plan, i, scale, train_noise):
    train_idx, test_idx = plan.fold(i)
    train, test = ds.subset(train_idx), ds.subset(test_idx)
    if train_noise is not None and train_noise[0] > 0:
        fraction, noise_seed = train_noise
        train = inject_label_noise(train, fraction, noise_seed + i)
    lp, lm = train.class_counts()
    if lp == 0 or lm == 0:
        raise InvalidArgumentError(
            f"training portion of fold {i} has a single class ({lp} positive, {lm} negative)"
        )
    scaling = None
    if scale:
        train, (test,), scaling = minmax_scale(train, [test])
    return train, test, scaling


def _check_plan(ds, plan):
    if len(plan) != len(ds):
        raise InvalidArgumentError(
            f"fold plan covers {len(plan)} samples but the dataset has {len(ds)}"
        )


def cross_validate(ds, hp, plan, scale=True, train_noise=None):
    """k-fold accuracy of one hyperparameter setting.

    The min-max scaler of every fold is fitted on that fold's training
    portion only. ``train_noise=(fraction, seed)`` flips training labels
    inside each fold (fold ``i`` uses ``seed + i``); held-out labels are
    never touched.
    """
    _check_plan(ds, plan)
    accs, scalers = [], []
    for i in range(plan.k):
        train, test, scaling = _prepare_fold(ds, plan, i, scale, train_noise)
        model, _ = fit(*split_by_class(train), hp)
        accs.append(accuracy(predict_batch(model, test.features), test.labels))
        scalers.append(scaling)
    mean, accs, std = _summary(accs)
    return CVResult(mean, accs, std, tuple(scalers))


def holdout_accuracy(train, test, hp, scale=True):
    """Fit on ``train`` and return ``(accuracy on test, model, report)``."""
    scaling = None
    if scale:
        train, (test,), scaling = minmax_scale(train, [test])
    model, report = fit(*split_by_class(train), hp)
    acc = accuracy(predict_batch(model, test.features), test.labels)
    return acc, model, report


DEFAULT_C_VALUES = tuple(2.0 ** e for e in range(-5, 6, 2))
DEFAULT_A_VALUES = (0.5, 1.0, 1.5, 2.0)
DEFAULT_GAMMA_VALUES = tuple(2.0 ** e for e in range(-4, 5))


def _positive_values(name, values):
    values = tuple(float(v) for v in values)
    if not values:
        raise InvalidArgumentError(f"{name} grid is empty")
    if not all(math.isfinite(v) and v > 0 for v in values):
        raise InvalidArgumentError(f"{name} grid must contain positive finite values")
    return values


@dataclass(frozen=True)
class GridSpec:
    """Cartesian hyperparameter grid.

    ``c_values`` is the grid for ``c1 = c3`` and ``penalty_values`` the grid
    for ``c2 = c4`` (defaults to ``c_values``); with ``tie_all`` the four
    constants share one value from ``c_values``. ``gamma_values`` is only
    used when ``kernel == "rbf"``.

    Ties in cross-validated accuracy go to smaller C values (c1, c2, c3, c4
    in that order), then smaller ``a``, then smaller ``gamma``.
    """

    c_values: tuple = DEFAULT_C_VALUES
    penalty_values: tuple = None
    a_values: tuple = DEFAULT_A_VALUES
    gamma_values: tuple = DEFAULT_GAMMA_VALUES
    kernel: str = "linear"
    tie_all: bool = False
    eta: float = 1e-5
    max_iter: int = 100

    def __post_init__(self):
        if self.kernel not in ("linear", "rbf", "kernel-linear"):
            raise InvalidArgumentError(f"unknown kernel {self.kernel!r}")
        object.__setattr__(self, "c_values", _positive_values("C", self.c_values))
        if self.penalty_values is not None:
            object.__setattr__(self, "penalty_values", _positive_values("penalty", self.penalty_values))
        object.__setattr__(self, "a_values", _positive_values("a", self.a_values))
        if self.kernel == "rbf":
            object.__setattr__(self, "gamma_values", _positive_values("gamma", self.gamma_values or ()))

    def kernels(self):
        if self.kernel == "linear":
            return [None]
        if self.kernel == "kernel-linear":
            return [KernelSpec("linear")]
        return [KernelSpec("rbf", g) for g in sorted(set(self.gamma_values))]

    def cells(self):
        """Distinct hyperparameter settings in tie-rule order."""
        if self.tie_all:
            cs = [(c, c) for c in sorted(set(self.c_values))]
        else:
            penalties = self.penalty_values if self.penalty_values is not None else self.c_values
            cs = list(itertools.product(sorted(set(self.c_values)), sorted(set(penalties))))
        cells = []
        for (ridge, penalty), a, kern in itertools.product(cs, sorted(set(self.a_values)), self.kernels()):
            cells.append(
                HyperParams(
                    c1=ridge, c2=penalty, c3=ridge, c4=penalty, a=a, kernel=kern,
                    eta=self.eta, max_iter=self.max_iter,
                )
            )
        cells.sort(key=_tie_key)
        return cells


def _tie_key(hp):
    gamma = 0.0 if hp.kernel is None or hp.kernel.kind != "rbf" else hp.kernel.gamma
    return (hp.c1, hp.c2, hp.c3, hp.c4, hp.a, gamma)


@dataclass(frozen=True)
class CellResult:
    hp: HyperParams
    mean: float
    std: float
    fold_accuracies: tuple
    converged_folds: int


@dataclass(frozen=True)
class GridSearchResult:
    best: HyperParams
    best_accuracy: float
    results: tuple
    plan: FoldPlan = field(repr=False)


def _batch_labels(U1, U2, scores_plus, scores_minus, norms_plus, norms_minus):
    with np.errstate(divide="ignore", invalid="ignore"):
        dp = np.abs(scores_plus) / norms_plus
        dm = np.abs(scores_minus) / norms_minus
    return np.where(dp <= dm, 1, -1)


def _evaluate_fold(train, test, cells):
    """Accuracy and convergence of every cell on one prepared fold.

    Cells sharing a kernel and ridge constants are iterated together as the
    columns of one matrix recursion.
    """
    X_plus, X_minus = split_by_class(train)
    out = [None] * len(cells)
    groups = {}
    for idx, hp in enumerate(cells):
        groups.setdefault((hp.kernel, hp.c1, hp.c3), []).append(idx)
    designs = {}
    for (kern, c1, c3), members in groups.items():
        if kern not in designs:
            if kern is None:
                design = build_linear_design(X_plus, X_minus)
                designs[kern] = (design, "direct", None, test.features)
            else:
                design, support, K = kernel_design(X_plus, X_minus, kern)
                designs[kern] = (design, "smw", K, gram(test.features, support, kern))
        design, method, K, Q = designs[kern]
        hps = [cells[i] for i in members]
        a_vals = [hp.a for hp in hps]
        eta, max_iter = hps[0].eta, hps[0].max_iter
        T1 = transfer_matrix(design, "positive", c1, method)
        T2 = transfer_matrix(design, "negative", c3, method)
        U1, _, _, conv1 = solve_batch(T1, design, "positive", [hp.c2 for hp in hps], a_vals, eta, max_iter)
        U2, _, _, conv2 = solve_batch(T2, design, "negative", [hp.c4 for hp in hps], a_vals, eta, max_iter)
        W1, W2 = U1[:-1], U2[:-1]
        if kern is None:
            n1 = np.sqrt(np.einsum("ij,ij->j", W1, W1))
            n2 = np.sqrt(np.einsum("ij,ij->j", W2, W2))
        else:
            n1 = np.sqrt(np.maximum(np.einsum("ij,ij->j", W1, K @ W1), 0.0))
            n2 = np.sqrt(np.maximum(np.einsum("ij,ij->j", W2, K @ W2), 0.0))
        labels = _batch_labels(U1, U2, Q @ W1 + U1[-1], Q @ W2 + U2[-1], n1, n2)
        for col, idx in enumerate(members):
            if not (n1[col] > 0 and n2[col] > 0):
                log.warning("degenerate model for %s; scoring the fold as 0", cells[idx])
                acc = 0.0
            else:
                acc = accuracy(labels[:, col], test.labels)
            out[idx] = (acc, bool(conv1[col] and conv2[col]))
    return out


def grid_search(ds, grid, k=5, seed=0, scale=True, n_jobs=1, plan=None):
    """Exhaustive cross-validated search over ``grid``.

    All cells share one stratified fold plan. Within a fold, Gram matrices
    are shared by every cell with the same kernel and the inverse operators
    by every cell with the same ridge constant, which is what keeps the
    default RBF grid affordable. Results do not depend on ``n_jobs``.

    Cells are iterated together as matrix columns, which rounds differently
    from a single :func:`cross_validate` run. Converged cells agree with it
    to rounding; cells that hit ``max_iter`` stop on an arbitrary iterate
    and their fold accuracies can differ.
    """
    if plan is None:
        plan = stratified_kfold(ds, k, seed)
    _check_plan(ds, plan)
    cells = grid.cells()
    folds = [_prepare_fold(ds, plan, i, scale, None)[:2] for i in range(plan.k)]

    def run(fold):
        return _evaluate_fold(fold[0], fold[1], cells)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            per_fold = list(pool.map(run, folds))
    else:
        per_fold = [run(f) for f in folds]

    results = []
    for idx, hp in enumerate(cells):
        accs = [per_fold[f][idx][0] for f in range(plan.k)]
        conv = sum(per_fold[f][idx][1] for f in range(plan.k))
        mean, accs, std = _summary(accs)
        results.append(CellResult(hp, mean, std, accs, conv))
    best = min(results, key=lambda r: (-r.mean, _tie_key(r.hp)))
    return GridSearchResult(best.hp, best.mean, tuple(results), plan)


def rank_row(accuracies):
    """Ranks with 1 for the highest accuracy; ties share their mean rank."""
    acc = np.asarray(accuracies, dtype=float).ravel()
    if acc.size == 0:
        raise InvalidArgumentError("cannot rank an empty row")
    ranks = np.empty(acc.size)
    order = np.argsort(-acc, kind="stable")
    i = 0
    while i < acc.size:
        j = i
        while j + 1 < acc.size and acc[order[j + 1]] == acc[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


@dataclass(frozen=True, eq=False)
class BenchmarkTable:
    dataset_names: tuple
    model_names: tuple
    accuracy: np.ndarray
    ranks: np.ndarray
    avg_accuracy: np.ndarray
    avg_rank: np.ndarray

    def best_model(self):
        return self.model_names[int(np.argmax(self.avg_accuracy))]

    def flags(self, row):
        """``"best"``/``"second"``/``""`` per model for ``row`` in {"accuracy", "rank"}."""
        values = self.avg_accuracy if row == "accuracy" else -self.avg_rank
        distinct = sorted(set(values.tolist()), reverse=True)
        out = []
        for v in values:
            if v == distinct[0]:
                out.append("best")
            elif len(distinct) > 1 and v == distinct[1]:
                out.append("second")
            else:
                out.append("")
        return out


def build_benchmark_table(accuracies, model_names=None, dataset_names=None):
    """Average accuracy and average rank per model.

    ``accuracies`` is a datasets-by-models matrix of percentages.
    """
    rows = [list(r) for r in accuracies]
    if not rows or not rows[0]:
        raise InvalidArgumentError("benchmark needs at least one dataset and one model")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise InvalidArgumentError("ragged benchmark results")
    acc = np.array(rows, dtype=float)
    if model_names is None:
        model_names = tuple(f"model{j + 1}" for j in range(width))
    if dataset_names is None:
        dataset_names = tuple(f"dataset{i + 1}" for i in range(len(rows)))
    if len(model_names) != width or len(dataset_names) != len(rows):
        raise InvalidArgumentError("name counts do not match the result matrix")
    ranks = np.vstack([rank_row(r) for r in acc])
    return BenchmarkTable(
        tuple(dataset_names), tuple(model_names), acc, ranks, acc.mean(axis=0), ranks.mean(axis=0)
    )


def _mark(text, flag):
    return {"best": f"**{text}**", "second": f"_{text}_"}.get(flag, text)


def render_table(table, decimals=2):
    """Plain-text table with ``Avg. Acc.`` and ``Avg. Rank`` rows.

    The best entry of each row is wrapped in ``**`` and the runner-up in
    ``_``, the convention used for bold and underline in published tables.
    """
    header = [""] + list(table.model_names)
    acc_cells = [
        _mark(f"{v:.{decimals}f}", f) for v, f in zip(table.avg_accuracy, table.flags("accuracy"))
    ]
    rank_cells = [
        _mark(f"{v:.{decimals}f}", f) for v, f in zip(table.avg_rank, table.flags("rank"))
    ]
    body = [["Avg. Acc."] + acc_cells, ["Avg. Rank"] + rank_cells]
    widths = [max(len(r[j]) for r in [header] + body) for j in range(len(header))]
    lines = []
    for r in [header] + body:
        lines.append("  ".join(c.ljust(w) if j == 0 else c.rjust(w) for j, (c, w) in enumerate(zip(r, widths))))
    rule = "-" * len(lines[0])
    return "\n".join([rule, lines[0], rule, lines[1], lines[2], rule]) + "\n"


def write_results_csv(records):
    """``dataset,model,accuracy`` CSV text from ``(dataset, model, accuracy)`` tuples."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dataset", "model", "accuracy"])
    for name, model, acc in records:
        writer.writerow([name, model, format(float(acc), ".17g")])
    return buf.getvalue()


def read_results_csv(path):
    """Load a long-format results CSV into a :class:`BenchmarkTable`."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["dataset", "model", "accuracy"]:
            raise InvalidDatasetError("results CSV must start with 'dataset,model,accuracy'")
        cells = {}
        datasets, models = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise InvalidDatasetError(f"line {lineno}: expected 3 columns")
            name, model, value = (c.strip() for c in row)
            try:
                cells[name, model] = float(value)
            except ValueError:
                raise InvalidDatasetError(f"line {lineno}: bad accuracy {value!r}") from None
            if name not in datasets:
                datasets.append(name)
            if model not in models:
                models.append(model)
    missing = [(d, m) for d in datasets for m in models if (d, m) not in cells]
    if missing:
        raise InvalidArgumentError(f"ragged benchmark results; missing {missing[0]}")
    matrix = [[cells[d, m] for m in models] for d in datasets]
    return build_benchmark_table(matrix, models, datasets)
