"""Dense SPD solves and the Sherman-Morrison-Woodbury inverse operator.

Cholesky factorization is delegated to :mod:`scipy.linalg`.
"""

import numpy as np
from scipy import linalg

from .errors import InvalidArgumentError, SingularMatrixError

__all__ = ["spd_factor", "spd_solve", "SmwOperator", "smw_apply"]


def _as_matrix(A, name):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise InvalidArgumentError(f"{name} must be two-dimensional, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidArgumentError(f"{name} has non-finite entries")
    return A


def spd_factor(A, check_symmetry=True):
    """Cholesky-factor a symmetric positive definite matrix.

    Returns the ``(c, lower)`` pair understood by :func:`scipy.linalg.cho_solve`.
    Raises :class:`SingularMatrixError` when a non-positive pivot appears.
    """
    A = _as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise InvalidArgumentError(f"A must be square, got shape {A.shape}")
    if check_symmetry:
        scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
        if np.max(np.abs(A - A.T), initial=0.0) > 1e-10 * scale:
            raise InvalidArgumentError("A is not symmetric")
    try:
        return linalg.cho_factor(A, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise SingularMatrixError(f"matrix is not positive definite: {exc}") from None


def spd_solve(A, B):
    """Solve ``A X = B`` for symmetric positive definite ``A``.

    ``B`` may be a vector or a matrix with as many rows as ``A``.
    """
    factor = spd_factor(A)
    B = np.asarray(B, dtype=float)
    if B.ndim not in (1, 2) or B.shape[0] != factor[0].shape[0]:
        raise InvalidArgumentError(
            f"right-hand side shape {B.shape} does not match matrix order {factor[0].shape[0]}"
        )
    return linalg.cho_solve(factor, B, check_finite=False)


class SmwOperator:
    """Apply ``(D D^T + ridge I)^{-1}`` through the Woodbury identity.

    For a tall design ``D`` of shape ``(p, m)`` only the ``m x m`` matrix
    ``ridge I + D^T D`` is factorized; the factor is computed once here and
    reused by every call to :meth:`apply`.
    """

    def __init__(self, design, ridge):
        design = _as_matrix(design, "design")
        if not (np.isfinite(ridge) and ridge > 0):
            raise InvalidArgumentError(f"ridge must be positive, got {ridge!r}")
        self.design = design.copy()
        self.design.setflags(write=False)
        self.ridge = float(ridge)
        m = design.shape[1]
        inner = design.T @ design
        inner[np.diag_indices(m)] += self.ridge
        self._factor = spd_factor(inner, check_symmetry=False)

    @property
    def shape(self):
        p = self.design.shape[0]
        return (p, p)

    def apply(self, rhs):
        """Return ``(D D^T + ridge I)^{-1} rhs`` for a vector or matrix ``rhs``."""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.ndim not in (1, 2) or rhs.shape[0] != self.design.shape[0]:
            raise InvalidArgumentError(
                f"rhs shape {rhs.shape} does not match design rows {self.design.shape[0]}"
            )
        inner = linalg.cho_solve(self._factor, self.design.T @ rhs, check_finite=False)
        return (rhs - self.design @ inner) / self.ridge

    def dense(self):
        """Materialize the full inverse; intended for tests and debugging."""
        return self.apply(np.eye(self.design.shape[0]))


def smw_apply(op, rhs):
    """Functional alias for :meth:`SmwOperator.apply`."""
    return op.apply(rhs)
