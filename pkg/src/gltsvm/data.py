"""Dataset loading, scaling, stratified folds, label noise and toy generators.

All seeded routines draw from ``numpy.random.Generator(PCG64(seed))`` so a
given seed reproduces the same folds and flips across platforms.
"""

import math
from dataclasses import dataclass, replace
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .errors import InvalidArgumentError, InvalidDatasetError, ParseError

__all__ = [
    "Dataset",
    "Scaling",
    "FoldPlan",
    "load_csv",
    "load_features_csv",
    "minmax_scale",
    "stratified_kfold",
    "inject_label_noise",
    "split_by_class",
    "gaussian_pair",
    "two_moons",
    "rng",
]


def rng(seed):
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix with binary labels in ``{-1, +1}``."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple = None

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.array(self.labels, dtype=int).ravel()
        if X.ndim != 2 or X.shape[0] != y.size:
            raise InvalidDatasetError(
                f"{X.shape[0] if X.ndim == 2 else '?'} samples but {y.size} labels"
            )
        if not np.all(np.isfinite(X)):
            raise InvalidDatasetError("features must be finite")
        if not np.all((y == 1) | (y == -1)):
            raise InvalidDatasetError("labels must be -1 or +1")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        if self.feature_names is not None:
            object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def __len__(self):
        return self.labels.size

    @property
    def n_features(self):
        return self.features.shape[1]

    def class_counts(self):
        return int(np.sum(self.labels == 1)), int(np.sum(self.labels == -1))

    def subset(self, index):
        index = np.asarray(index)
        return Dataset(self.features[index], self.labels[index], self.feature_names)

    def with_labels(self, labels):
        return replace(self, labels=labels)

    def with_features(self, features):
        return replace(self, features=features)


def _is_real(token):
    try:
        float(token)
    except ValueError:
        return False
    return True


def _split_line(line, lineno):
    if '"' in line or "'" in line:
        raise ParseError("quoted cells are not supported", line=lineno)
    return [cell.strip() for cell in line.split(",")]


def _read_rows(path):
    with open(path, encoding="utf-8-sig") as fh:
        raw = fh.read().splitlines()
    rows = []
    for i, line in enumerate(raw, start=1):
        if not line.strip():
            continue
        rows.append((i, _split_line(line, i)))
    return rows


def _resolve_label_column(label_column, width, header):
    if label_column is None or label_column == "last":
        return width - 1
    if isinstance(label_column, str):
        if label_column.lstrip("-").isdigit():
            label_column = int(label_column)
        elif header is not None and label_column in header:
            return header.index(label_column)
        else:
            raise InvalidArgumentError(f"label column {label_column!r} not found")
    idx = int(label_column)
    if idx < 0:
        idx += width
    if not 0 <= idx < width:
        raise InvalidArgumentError(f"label column {label_column} out of range for {width} columns")
    return idx


def _map_labels(raw, positive_label):
    distinct = sorted(set(raw))
    if len(distinct) > 2:
        shown = ", ".join(distinct[:5])
        raise InvalidDatasetError(f"expected two distinct labels, found {len(distinct)}: {shown}")
    if positive_label is not None:
        positive_label = str(positive_label)
        if positive_label not in distinct:
            raise InvalidDatasetError(f"positive label {positive_label!r} does not occur")
        positive = positive_label
    else:
        numeric = {}
        if all(_is_real(v) for v in distinct):
            numeric = {v: float(v) for v in distinct}
        values = set(numeric.values())
        if numeric and (values <= {-1.0, 1.0} or values <= {0.0, 1.0}):
            return np.array([1 if numeric[v] == 1.0 else -1 for v in raw], dtype=int)
        positive = distinct[-1]
    return np.array([1 if v == positive else -1 for v in raw], dtype=int)


def load_csv(path, label_column="last", positive_label=None):
    """Read a comma-separated file into a :class:`Dataset`.

    ``label_column`` may be a 0-based index (negative counts from the end),
    a header name, or ``"last"``. Labels exactly ``{-1, 1}`` or ``{0, 1}``
    map naturally; any other pair maps the lexicographically greater raw
    value to +1 unless ``positive_label`` names the positive class.

    A header is assumed when the first row holds a non-numeric value in a
    feature column.
    """
    rows = _read_rows(path)
    if not rows:
        raise InvalidDatasetError(f"{path}: no data rows")
    width = len(rows[0][1])
    for lineno, cells in rows:
        if len(cells) != width:
            raise ParseError(f"expected {width} columns, found {len(cells)}", line=lineno)
    first = rows[0][1]
    header = None
    if _named(label_column):
        header = first
        rows = rows[1:]
        label_idx = _resolve_label_column(label_column, width, header)
    else:
        label_idx = _resolve_label_column(label_column, width, None)
        if any(not _is_real(c) for j, c in enumerate(first) if j != label_idx):
            header = first
            rows = rows[1:]
    if not rows:
        raise InvalidDatasetError(f"{path}: no data rows")
    feats = []
    raw = []
    for lineno, cells in rows:
        values = []
        for j, cell in enumerate(cells):
            if j == label_idx:
                continue
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"cannot parse {cell!r} as a real", line=lineno, column=j + 1) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {cell!r}", line=lineno, column=j + 1)
            values.append(v)
        feats.append(values)
        raw.append(cells[label_idx])
    names = None
    if header is not None:
        names = tuple(h for j, h in enumerate(header) if j != label_idx)
    labels = _map_labels(raw, positive_label)
    return Dataset(np.array(feats, dtype=float).reshape(len(feats), width - 1), labels, names)


def _named(label_column):
    return (
        isinstance(label_column, str)
        and label_column != "last"
        and not label_column.lstrip("-").isdigit()
    )


def load_features_csv(path, drop_column=None):
    """Read an unlabeled feature matrix; an empty file yields zero rows.

    ``drop_column`` removes one column (index, name or ``"last"``) before
    parsing, so labeled files can be fed to a predictor.
    """
    rows = _read_rows(path)
    if not rows:
        return np.zeros((0, 0)), None
    width = len(rows[0][1])
    for lineno, cells in rows:
        if len(cells) != width:
            raise ParseError(f"expected {width} columns, found {len(cells)}", line=lineno)
    header = None
    first = rows[0][1]
    if drop_column is not None and _named(drop_column):
        header = first
        rows = rows[1:]
    drop = None if drop_column is None else _resolve_label_column(drop_column, width, header)
    if header is None and any(not _is_real(c) for j, c in enumerate(first) if j != drop):
        header = first
        rows = rows[1:]
    out = []
    for lineno, cells in rows:
        values = []
        for j, cell in enumerate(cells):
            if j == drop:
                continue
            try:
                values.append(float(cell))
            except ValueError:
                raise ParseError(f"cannot parse {cell!r} as a real", line=lineno, column=j + 1) from None
        out.append(values)
    ncol = width - (drop is not None)
    labels_raw = [cells[drop] for _, cells in rows] if drop is not None else None
    return np.array(out, dtype=float).reshape(len(out), ncol), labels_raw


@dataclass(frozen=True, eq=False)
class Scaling:
    """Per-feature affine map ``(x - minimum) / span`` fitted on training data.

    Constant features get ``span = 0`` and map to 0.
    """

    minimum: np.ndarray
    span: np.ndarray

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=float)
        lo = X.min(axis=0)
        span = X.max(axis=0) - lo
        return cls(lo, np.where(span > 0, span, 0.0))

    def apply(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.minimum.size:
            raise InvalidArgumentError(
                f"feature count {X.shape[-1]} does not match scaler width {self.minimum.size}"
            )
        out = np.zeros(np.broadcast_shapes(X.shape, self.span.shape))
        return np.divide(X - self.minimum, self.span, out=out, where=self.span > 0)


def minmax_scale(train, others=()):
    """Scale ``train`` to ``[0, 1]`` per feature and apply the same map to ``others``.

    Returns ``(scaled_train, scaled_others, scaling)``.
    """
    scaling = Scaling.fit(train.features)
    scaled_others = []
    for ds in others:
        if ds.n_features != train.n_features:
            raise InvalidArgumentError(
                f"feature count {ds.n_features} does not match training width {train.n_features}"
            )
        scaled_others.append(ds.with_features(scaling.apply(ds.features)))
    return train.with_features(scaling.apply(train.features)), scaled_others, scaling


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    assignments: np.ndarray

    def __post_init__(self):
        a = np.array(self.assignments, dtype=int)
        a.setflags(write=False)
        object.__setattr__(self, "assignments", a)

    def __len__(self):
        return self.assignments.size

    def fold(self, i):
        """Return ``(train_index, test_index)`` for fold ``i``."""
        test = self.assignments == i
        return np.flatnonzero(~test), np.flatnonzero(test)

    def __iter__(self):
        for i in range(self.k):
            yield self.fold(i)


def stratified_kfold(ds, k, seed):
    """Seeded stratified fold assignment.

    Each class is shuffled independently, then dealt round robin across the
    folds; the dealing position carries over from one class to the next so
    fold sizes stay balanced as well. A class smaller than ``k`` is allowed
    and simply misses some test folds.
    """
    if int(k) != k or k < 2:
        raise InvalidArgumentError(f"k must be an integer >= 2, got {k!r}")
    k = int(k)
    if len(ds) < k:
        raise InvalidArgumentError(f"{len(ds)} samples cannot fill k={k} folds")
    lp, lm = ds.class_counts()
    if min(lp, lm) == 0:
        raise InvalidArgumentError(f"both classes are required; found {lp} positive and {lm} negative samples")
    gen = rng(seed)
    assignments = np.empty(len(ds), dtype=int)
    start = 0
    for label in (1, -1):
        members = np.flatnonzero(ds.labels == label)
        members = members[gen.permutation(members.size)]
        assignments[members] = (start + np.arange(members.size)) % k
        start = (start + members.size) % k
    return FoldPlan(k, assignments)


def _round_half_up(x):
    return int(x.quantize(Decimal(1), rounding=ROUND_HALF_UP))


def inject_label_noise(ds, fraction, seed):
    """Flip exactly ``round(fraction * len(ds))`` labels chosen without replacement.

    Rounding is half away from zero on the decimal value of ``fraction``,
    so ``0.15 * 10`` flips 2 labels.
    """
    if not (0.0 <= fraction <= 1.0):
        raise InvalidArgumentError(f"noise fraction must lie in [0, 1], got {fraction!r}")
    l = len(ds)
    count = _round_half_up(Decimal(repr(float(fraction))) * l) if l else 0
    labels = ds.labels.copy()
    if count:
        flip = rng(seed).choice(l, size=count, replace=False)
        labels[flip] = -labels[flip]
    return ds.with_labels(labels)


def split_by_class(ds):
    """Return ``(X_plus, X_minus)`` keeping the original row order within each class."""
    pos = ds.labels == 1
    if not pos.any() or pos.all():
        lp, lm = ds.class_counts()
        raise InvalidDatasetError(
            f"both classes are required; found {lp} positive and {lm} negative samples"
        )
    return ds.features[pos], ds.features[~pos]


def gaussian_pair(n_per_class, margin=4.0, sigma=1.0, n_features=2, seed=0):
    """Two isotropic Gaussian classes whose means sit ``margin * sigma`` on
    either side of the hyperplane ``x_0 = 0``."""
    gen = rng(seed)
    shift = np.zeros(n_features)
    shift[0] = margin * sigma
    pos = gen.normal(0.0, sigma, (n_per_class, n_features)) + shift
    neg = gen.normal(0.0, sigma, (n_per_class, n_features)) - shift
    X = np.vstack([pos, neg])
    y = np.r_[np.ones(n_per_class, int), -np.ones(n_per_class, int)]
    order = gen.permutation(y.size)
    return Dataset(X[order], y[order])


def two_moons(n_samples, noise=0.1, seed=0):
    """Interleaving half circles; the upper moon is labeled +1."""
    gen = rng(seed)
    n_out = n_samples // 2
    n_in = n_samples - n_out
    t_out = np.linspace(0.0, np.pi, n_out)
    t_in = np.linspace(0.0, np.pi, n_in)
    upper = np.c_[np.cos(t_out), np.sin(t_out)]
    lower = np.c_[1.0 - np.cos(t_in), 0.5 - np.sin(t_in)]
    X = np.vstack([upper, lower]) + gen.normal(0.0, noise, (n_samples, 2))
    y = np.r_[np.ones(n_out, int), -np.ones(n_in, int)]
    order = gen.permutation(n_samples)
    return Dataset(X[order], y[order])
