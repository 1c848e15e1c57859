"""Trained twin models, their decision rules, and the v1 model file format.

A v1 file is line oriented::

    gltsvm-model v1
    kind linear            # or: kind kernel
    n 2                    # or: n 2 l 40
    kernel rbf 0.5         # kernel models only (or: kernel linear)
    u_plus 0.1 -0.3
    b_plus 0.7
    u_minus ...
    b_minus ...
    scale_min 0 0          # optional, see below
    scale_span 1 1
    support                # kernel models only, followed by l rows
    0.25 0.5
    ...

Reals are written with 17 significant digits so that loading reproduces
every parameter bitwise. The optional ``scale_min``/``scale_span`` pair
records the min-max feature scaling that was fitted on the training data
(a span of 0 marks a constant feature, which maps to 0); readers that do not know the lines may skip them.
"""

import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateModelError,
    InvalidArgumentError,
    ParseError,
    UnsupportedVersionError,
)
from .kernels import KernelSpec, gram

__all__ = [
    "LinearModel",
    "KernelModel",
    "predict_linear",
    "predict_kernel",
    "predict",
    "predict_batch",
    "save_model",
    "load_model",
    "dumps_model",
    "loads_model",
]

FORMAT_HEADER = "gltsvm-model"
FORMAT_VERSION = "v1"


def _vector(v):
    arr = np.array(v, dtype=float).ravel()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Pair of non-parallel hyperplanes ``u+ . x + b+ = 0`` and ``u- . x + b- = 0``."""

    u_plus: np.ndarray
    b_plus: float
    u_minus: np.ndarray
    b_minus: float
    scaling: object = None

    def __post_init__(self):
        object.__setattr__(self, "u_plus", _vector(self.u_plus))
        object.__setattr__(self, "u_minus", _vector(self.u_minus))
        object.__setattr__(self, "b_plus", float(self.b_plus))
        object.__setattr__(self, "b_minus", float(self.b_minus))
        if self.u_plus.shape != self.u_minus.shape:
            raise InvalidArgumentError("u_plus and u_minus differ in length")

    @property
    def n_features(self):
        return self.u_plus.size

    def check(self):
        if not np.linalg.norm(self.u_plus) > 0 or not np.linalg.norm(self.u_minus) > 0:
            raise DegenerateModelError("linear model has a zero-norm hyperplane normal")


@dataclass(frozen=True, eq=False)
class KernelModel:
    """Pair of kernel hypersurfaces ``k(x, X^T) v +- + b +- = 0``.

    ``support`` holds the stacked training inputs (positives first). The
    per-side normalizers ``sqrt(v^T k(X, X^T) v)`` are query independent and
    are computed once on construction.
    """

    v_plus: np.ndarray
    b_plus: float
    v_minus: np.ndarray
    b_minus: float
    support: np.ndarray
    kernel: KernelSpec
    scaling: object = None
    gram_cache: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "v_plus", _vector(self.v_plus))
        object.__setattr__(self, "v_minus", _vector(self.v_minus))
        object.__setattr__(self, "b_plus", float(self.b_plus))
        object.__setattr__(self, "b_minus", float(self.b_minus))
        support = np.array(self.support, dtype=float)
        if support.ndim != 2:
            raise InvalidArgumentError("support must be a sample matrix")
        support.setflags(write=False)
        object.__setattr__(self, "support", support)
        l = support.shape[0]
        if self.v_plus.size != l or self.v_minus.size != l:
            raise InvalidArgumentError(
                f"coefficient lengths ({self.v_plus.size}, {self.v_minus.size}) "
                f"do not match support size {l}"
            )
        K = self.gram_cache
        if K is None:
            K = gram(support, support, self.kernel)
        object.__setattr__(self, "gram_cache", K)
        norms = []
        for v in (self.v_plus, self.v_minus):
            q = float(v @ K @ v)
            norms.append(np.sqrt(q) if q > 0 else 0.0)
        object.__setattr__(self, "_norms", tuple(norms))

    @property
    def n_features(self):
        return self.support.shape[1]

    def check(self):
        if not (self._norms[0] > 0 and self._norms[1] > 0):
            raise DegenerateModelError("kernel model has a zero-norm hypersurface")


def _queries(m, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise InvalidArgumentError(f"expected a sample matrix, got shape {X.shape}")
    if X.shape[0] and X.shape[1] != m.n_features:
        raise InvalidArgumentError(
            f"sample width {X.shape[1]} does not match model width {m.n_features}"
        )
    if m.scaling is not None and X.shape[0]:
        X = m.scaling.apply(X)
    return X


def _decide(dist_plus, dist_minus):
    # ties go to the positive class
    return np.where(dist_plus <= dist_minus, 1, -1).astype(int)


def _linear_distances(m, X):
    dp = np.abs(X @ m.u_plus + m.b_plus) / np.linalg.norm(m.u_plus)
    dm = np.abs(X @ m.u_minus + m.b_minus) / np.linalg.norm(m.u_minus)
    return dp, dm


def _kernel_distances(m, X):
    K = gram(X, m.support, m.kernel)
    dp = np.abs(K @ m.v_plus + m.b_plus) / m._norms[0]
    dm = np.abs(K @ m.v_minus + m.b_minus) / m._norms[1]
    return dp, dm


def predict_linear(m, x):
    """Label of ``x`` under the nearest-hyperplane rule."""
    m.check()
    X = _queries(m, x)
    if X.shape[0] != 1:
        raise InvalidArgumentError("predict_linear expects a single sample")
    return int(_decide(*_linear_distances(m, X))[0])


def predict_kernel(m, x):
    """Label of ``x`` under the nearest-hypersurface rule."""
    m.check()
    X = _queries(m, x)
    if X.shape[0] != 1:
        raise InvalidArgumentError("predict_kernel expects a single sample")
    return int(_decide(*_kernel_distances(m, X))[0])


def predict(m, x):
    if isinstance(m, KernelModel):
        return predict_kernel(m, x)
    return predict_linear(m, x)


def predict_batch(m, X):
    """Labels in ``{-1, +1}`` for every row of ``X``."""
    m.check()
    X = _queries(m, X)
    if X.shape[0] == 0:
        return np.zeros(0, dtype=int)
    if isinstance(m, KernelModel):
        return _decide(*_kernel_distances(m, X))
    return _decide(*_linear_distances(m, X))


def _fmt(values):
    return " ".join(format(float(v), ".17g") for v in np.atleast_1d(values))


def dumps_model(m):
    """Serialize a model to the v1 text format."""
    m.check()
    kernel = isinstance(m, KernelModel)
    lines = [f"{FORMAT_HEADER} {FORMAT_VERSION}", f"kind {'kernel' if kernel else 'linear'}"]
    if kernel:
        lines.append(f"n {m.n_features} l {m.support.shape[0]}")
        if m.kernel.kind == "rbf":
            lines.append(f"kernel rbf {format(m.kernel.gamma, '.17g')}")
        else:
            lines.append("kernel linear")
        coef = (m.v_plus, m.v_minus)
    else:
        lines.append(f"n {m.n_features}")
        coef = (m.u_plus, m.u_minus)
    lines += [
        f"u_plus {_fmt(coef[0])}",
        f"b_plus {_fmt(m.b_plus)}",
        f"u_minus {_fmt(coef[1])}",
        f"b_minus {_fmt(m.b_minus)}",
    ]
    if m.scaling is not None:
        lines.append(f"scale_min {_fmt(m.scaling.minimum)}")
        lines.append(f"scale_span {_fmt(m.scaling.span)}")
    if kernel:
        lines.append("support")
        lines += [_fmt(row) for row in m.support]
    return "\n".join(lines) + "\n"


def write_atomic(path, text):
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_model(m, path):
    write_atomic(path, dumps_model(m))


class _Lines:
    def __init__(self, text):
        self.lines = [ln.strip() for ln in text.splitlines()]
        self.pos = 0

    def next(self, what):
        while self.pos < len(self.lines) and not self.lines[self.pos]:
            self.pos += 1
        if self.pos >= len(self.lines):
            raise ParseError(f"unexpected end of file, expected {what}", line=self.pos + 1)
        self.pos += 1
        return self.pos, self.lines[self.pos - 1]

    def peek_key(self):
        pos = self.pos
        while pos < len(self.lines) and not self.lines[pos]:
            pos += 1
        return self.lines[pos].split()[0] if pos < len(self.lines) else None


def _reals(tokens, lineno, count=None):
    try:
        values = [float(t) for t in tokens]
    except ValueError:
        raise ParseError("malformed real number", line=lineno) from None
    if count is not None and len(values) != count:
        raise ParseError(f"expected {count} values, found {len(values)}", line=lineno)
    if not all(np.isfinite(values)):
        raise ParseError("non-finite value", line=lineno)
    return values


def _keyed(lines, key, count):
    lineno, text = lines.next(key)
    tokens = text.split()
    if tokens[0] != key:
        raise ParseError(f"expected '{key}', found '{tokens[0]}'", line=lineno)
    return _reals(tokens[1:], lineno, count)


def _count(token, lineno):
    try:
        value = int(token)
    except ValueError:
        raise ParseError(f"malformed count {token!r}", line=lineno) from None
    if value < 1:
        raise ParseError("dimensions must be positive", line=lineno)
    return value


def loads_model(text):
    """Parse a v1 model file."""
    from .data import Scaling

    lines = _Lines(text)
    lineno, header = lines.next("header")
    tokens = header.split()
    if len(tokens) != 2 or tokens[0] != FORMAT_HEADER:
        raise ParseError("missing 'gltsvm-model' header", line=lineno)
    if tokens[1] != FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported model version {tokens[1]!r}", line=lineno)

    lineno, text_kind = lines.next("kind")
    tokens = text_kind.split()
    if len(tokens) != 2 or tokens[0] != "kind" or tokens[1] not in ("linear", "kernel"):
        raise ParseError(f"unknown model kind line {text_kind!r}", line=lineno)
    kernel = tokens[1] == "kernel"

    lineno, dims = lines.next("dimensions")
    tokens = dims.split()
    if kernel:
        if len(tokens) != 4 or tokens[0] != "n" or tokens[2] != "l":
            raise ParseError("expected 'n <int> l <int>'", line=lineno)
        n, l = _count(tokens[1], lineno), _count(tokens[3], lineno)
        lineno, ktext = lines.next("kernel")
        tokens = ktext.split()
        if tokens[:2] == ["kernel", "linear"] and len(tokens) == 2:
            spec = KernelSpec("linear")
        elif tokens[:2] == ["kernel", "rbf"] and len(tokens) == 3:
            (gamma,) = _reals(tokens[2:], lineno, 1)
            if gamma <= 0:
                raise ParseError("rbf gamma must be positive", line=lineno)
            spec = KernelSpec("rbf", gamma)
        else:
            raise ParseError(f"unknown kernel line {ktext!r}", line=lineno)
        width = l
    else:
        if len(tokens) != 2 or tokens[0] != "n":
            raise ParseError("expected 'n <int>'", line=lineno)
        n = _count(tokens[1], lineno)
        width = n

    u_plus = _keyed(lines, "u_plus", width)
    (b_plus,) = _keyed(lines, "b_plus", 1)
    u_minus = _keyed(lines, "u_minus", width)
    (b_minus,) = _keyed(lines, "b_minus", 1)

    scaling = None
    if lines.peek_key() == "scale_min":
        lo = _keyed(lines, "scale_min", n)
        span = _keyed(lines, "scale_span", n)
        scaling = Scaling(np.array(lo), np.array(span))

    if not kernel:
        if lines.peek_key() is not None:
            lineno, extra = lines.next("end of file")
            raise ParseError(f"unexpected content {extra!r}", line=lineno)
        return LinearModel(u_plus, b_plus, u_minus, b_minus, scaling=scaling)

    lineno, marker = lines.next("support")
    if marker != "support":
        raise ParseError(f"expected 'support', found {marker!r}", line=lineno)
    rows = []
    for _ in range(l):
        lineno, row = lines.next("support row")
        rows.append(_reals(row.split(), lineno, n))
    if lines.peek_key() is not None:
        lineno, extra = lines.next("end of file")
        raise ParseError(f"unexpected content {extra!r}", line=lineno)
    try:
        return KernelModel(u_plus, b_plus, u_minus, b_minus, np.array(rows), spec, scaling=scaling)
    except InvalidArgumentError as exc:
        raise ParseError(str(exc)) from None


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
