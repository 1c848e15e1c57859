"""Kernel functions and the augmented design matrices used by the solvers."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "KernelSpec",
    "kernel_eval",
    "gram",
    "AugmentedDesign",
    "build_linear_design",
    "build_kernel_design",
]

KERNEL_KINDS = ("linear", "rbf")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and width.

    ``gamma`` is only meaningful for ``kind == "rbf"``, where the kernel is
    ``exp(-gamma * ||x - y||^2)``.
    """

    kind: str = "rbf"
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise InvalidArgumentError(f"unknown kernel {self.kind!r}; expected linear or rbf")
        if self.kind == "rbf" and not (np.isfinite(self.gamma) and self.gamma > 0):
            raise InvalidArgumentError(f"rbf kernel needs gamma > 0, got {self.gamma!r}")


def _samples(A, name):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    if A.ndim != 2:
        raise InvalidArgumentError(f"{name} must be a sample matrix, got shape {A.shape}")
    return A


def kernel_eval(x, y, spec):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise InvalidArgumentError(f"vector lengths differ: {x.size} vs {y.size}")
    if spec.kind == "linear":
        return float(x @ y)
    d = x - y
    return float(np.exp(-spec.gamma * (d @ d)))


def gram(A, B, spec):
    """Kernel matrix with entry ``(i, j) = k(A[i], B[j])``."""
    A = _samples(A, "A")
    B = _samples(B, "B")
    if A.shape[1] != B.shape[1]:
        raise InvalidArgumentError(f"feature counts differ: {A.shape[1]} vs {B.shape[1]}")
    cross = A @ B.T
    if spec.kind == "linear":
        return cross
    sq = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * cross
    # expansion above can dip slightly below zero
    np.maximum(sq, 0.0, out=sq)
    if A is B or (A.shape == B.shape and np.array_equal(A, B)):
        np.fill_diagonal(sq, 0.0)
        sq = 0.5 * (sq + sq.T)
    return np.exp(-spec.gamma * sq)


@dataclass(frozen=True)
class AugmentedDesign:
    """Class-wise design blocks with a trailing row of ones.

    Columns of ``positive_block`` are the augmented positive samples and
    columns of ``negative_block`` the augmented negative samples; both have
    ``dim + 1`` rows.
    """

    positive_block: np.ndarray
    negative_block: np.ndarray

    @property
    def dim(self):
        return self.positive_block.shape[0] - 1


def _split_inputs(X_plus, X_minus):
    X_plus = _samples(X_plus, "X_plus")
    X_minus = _samples(X_minus, "X_minus")
    if X_plus.shape[0] < 1 or X_minus.shape[0] < 1:
        raise InvalidArgumentError("both classes need at least one sample")
    if X_plus.shape[1] != X_minus.shape[1]:
        raise InvalidArgumentError(
            f"feature counts differ: {X_plus.shape[1]} vs {X_minus.shape[1]}"
        )
    return X_plus, X_minus


def _augment(rows):
    block = np.vstack([rows.T, np.ones((1, rows.shape[0]))])
    block.setflags(write=False)
    return block


def build_linear_design(X_plus, X_minus):
    """``M = [X+, e]^T`` and ``N = [X-, e]^T``."""
    X_plus, X_minus = _split_inputs(X_plus, X_minus)
    return AugmentedDesign(_augment(X_plus), _augment(X_minus))


def build_kernel_design(X_plus, X_minus, spec):
    """``G = [k(X+, X^T), e]^T`` and ``H = [k(X-, X^T), e]^T`` with ``X = [X+; X-]``."""
    X_plus, X_minus = _split_inputs(X_plus, X_minus)
    X = np.vstack([X_plus, X_minus])
    K = gram(X, X, spec)
    lp = X_plus.shape[0]
    return AugmentedDesign(_augment(K[:lp]), _augment(K[lp:]))
