"""Fixed-point training of the guardian-loss twin SVM.

Each of the two subproblems has the form::

    min_u  1/2 ||A^T u||^2 + 1/2 c ||u||^2 + p * sum_j L(1 + sign * B_j^T u)

where ``A`` is the block of the class the hyperplane should pass near,
``B`` the block of the opposite class, ``L`` the guardian loss, and
``sign`` is +1 for the positive hyperplane and -1 for the negative one.
Setting the gradient to zero gives the update::

    u <- -sign * p * (A A^T + c I)^{-1} B s(u),   s_j(u) = L'(1 + sign * B_j^T u)

The matrix ``(A A^T + c I)^{-1} B`` never changes between iterations, so it
is computed once per fit ("transfer" matrix below). The linear problem
obtains it from a Cholesky factor of the ``(n+1)``-order matrix; the kernel
problem goes through the Woodbury identity so that only a class-sized
matrix is factorized.
"""

import logging
import numbers
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from .errors import DivergenceError, InvalidArgumentError
from .kernels import AugmentedDesign, KernelSpec, build_linear_design, gram, _split_inputs
from .losses import _EXP_LIMIT, _weight_unchecked, gloss, gloss_weight
from .model import KernelModel, LinearModel
from .numerics import SmwOperator, spd_factor

__all__ = [
    "HyperParams",
    "SideReport",
    "SolverReport",
    "objective",
    "gradient",
    "objective_linear",
    "gradient_linear",
    "objective_kernel",
    "gradient_kernel",
    "transfer_matrix",
    "solve_design",
    "fit_linear",
    "fit_kernel",
    "fit",
]

log = logging.getLogger(__name__)

SIDES = ("positive", "negative")


@dataclass(frozen=True)
class HyperParams:
    """Trade-off constants, loss shape and stopping rule.

    ``c1``/``c3`` weight the regularizer of the positive/negative
    subproblem and ``c2``/``c4`` the loss on the opposite class. ``kernel``
    is ``None`` for the linear model.
    """

    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0
    c4: float = 1.0
    a: float = 1.0
    kernel: KernelSpec = None
    eta: float = 1e-5
    max_iter: int = 100

    def __post_init__(self):
        for name in ("c1", "c2", "c3", "c4", "a", "eta"):
            value = getattr(self, name)
            if not (isinstance(value, numbers.Real) and math.isfinite(value) and value > 0):
                raise InvalidArgumentError(f"{name} must be a positive real, got {value!r}")
            object.__setattr__(self, name, float(value))
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise InvalidArgumentError(f"max_iter must be an integer >= 1, got {self.max_iter!r}")
        object.__setattr__(self, "max_iter", int(self.max_iter))
        if self.kernel is not None and not isinstance(self.kernel, KernelSpec):
            raise InvalidArgumentError("kernel must be a KernelSpec or None")

    @classmethod
    def tied(cls, c=1.0, **kwargs):
        return cls(c1=c, c2=c, c3=c, c4=c, **kwargs)

    def side(self, side):
        """``(ridge, penalty, sign)`` for one subproblem."""
        if side == "positive":
            return self.c1, self.c2, 1.0
        if side == "negative":
            return self.c3, self.c4, -1.0
        raise InvalidArgumentError(f"side must be 'positive' or 'negative', got {side!r}")

    def as_dict(self):
        out = {k: getattr(self, k) for k in ("c1", "c2", "c3", "c4", "a", "eta", "max_iter")}
        out["kernel"] = None if self.kernel is None else self.kernel.kind
        out["gamma"] = None if self.kernel is None or self.kernel.kind != "rbf" else self.kernel.gamma
        return out


@dataclass(frozen=True)
class SideReport:
    iterations: int
    final_residual: float
    grad_norm: float
    converged: bool
    per_sample_loss: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class SolverReport:
    """Convergence diagnostics of both subproblems."""

    positive: SideReport
    negative: SideReport
    wall_time: float = 0.0

    iterations_pos = property(lambda self: self.positive.iterations)
    iterations_neg = property(lambda self: self.negative.iterations)
    final_residual_pos = property(lambda self: self.positive.final_residual)
    final_residual_neg = property(lambda self: self.negative.final_residual)
    grad_norm_pos = property(lambda self: self.positive.grad_norm)
    grad_norm_neg = property(lambda self: self.negative.grad_norm)
    converged_pos = property(lambda self: self.positive.converged)
    converged_neg = property(lambda self: self.negative.converged)
    per_sample_loss_pos = property(lambda self: self.positive.per_sample_loss)
    per_sample_loss_neg = property(lambda self: self.negative.per_sample_loss)

    @property
    def converged(self):
        return self.positive.converged and self.negative.converged


def _blocks(design, side):
    if side == "positive":
        return design.positive_block, design.negative_block
    if side == "negative":
        return design.negative_block, design.positive_block
    raise InvalidArgumentError(f"side must be 'positive' or 'negative', got {side!r}")


def _check_u(u, design):
    u = np.asarray(u, dtype=float).ravel()
    if u.size != design.dim + 1:
        raise InvalidArgumentError(f"parameter length {u.size} does not match design order {design.dim + 1}")
    return u


def objective(u, design, hp, side):
    """Subproblem objective at ``u`` (linear or kernel design alike)."""
    u = _check_u(u, design)
    own, opp = _blocks(design, side)
    ridge, penalty, sign = hp.side(side)
    fit_term = own.T @ u
    resid = 1.0 + sign * (opp.T @ u)
    return float(
        0.5 * fit_term @ fit_term + 0.5 * ridge * (u @ u) + penalty * np.sum(gloss(resid, hp.a))
    )


def gradient(u, design, hp, side):
    """Gradient ``(A A^T + c I) u + sign * p * B s(u)`` of :func:`objective`."""
    u = _check_u(u, design)
    own, opp = _blocks(design, side)
    ridge, penalty, sign = hp.side(side)
    s = gloss_weight(1.0 + sign * (opp.T @ u), hp.a)
    return own @ (own.T @ u) + ridge * u + sign * penalty * (opp @ s)


objective_linear = objective
gradient_linear = gradient
objective_kernel = objective
gradient_kernel = gradient


def transfer_matrix(design, side, ridge, method="direct"):
    """``(A A^T + ridge I)^{-1} B`` for one subproblem.

    ``method="direct"`` factorizes the ``(d+1)``-order matrix itself;
    ``method="smw"`` factorizes ``ridge I + A^T A`` (class-sized) instead.
    """
    own, opp = _blocks(design, side)
    if method == "direct":
        A = own @ own.T
        A[np.diag_indices_from(A)] += ridge
        factor = spd_factor(A, check_symmetry=False)
        return linalg.cho_solve(factor, opp, check_finite=False)
    if method == "smw":
        return SmwOperator(own, ridge).apply(opp)
    raise InvalidArgumentError(f"unknown method {method!r}")


def _iterate(transfer, design, hp, side, init):
    own, opp = _blocks(design, side)
    ridge, penalty, sign = hp.side(side)
    step = -sign * penalty * transfer
    oppT = opp.T
    u = np.zeros(design.dim + 1) if init is None else _check_u(init, design).copy()
    residual = math.inf
    converged = False
    t = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, hp.max_iter + 1):
            u_next = step @ _weight_unchecked(1.0 + sign * (oppT @ u), hp.a)
            diff = u_next - u
            residual = math.sqrt(diff @ diff)
            if not math.isfinite(residual):
                raise DivergenceError(f"{side} subproblem produced a non-finite iterate", t)
            u = u_next
            if residual < hp.eta:
                converged = True
                break
    grad = float(np.linalg.norm(gradient(u, design, hp, side)))
    losses = gloss(1.0 + sign * (oppT @ u), hp.a)
    return u, SideReport(t, residual, grad, converged, np.atleast_1d(losses))


def solve_batch(transfer, design, side, penalties, a_values, eta, max_iter):
    """Iterate one subproblem for many ``(penalty, a)`` pairs sharing a ridge.

    Column ``k`` of the result follows the same recursion as a single fit
    with ``penalties[k]`` and ``a_values[k]``; converged columns are frozen.
    Returns ``(U, iterations, residuals, converged)``.
    """
    own, opp = _blocks(design, side)
    sign = 1.0 if side == "positive" else -1.0
    penalties = np.asarray(penalties, dtype=float)
    a_values = np.asarray(a_values, dtype=float)
    m = penalties.size
    U = np.zeros((design.dim + 1, m))
    iterations = np.zeros(m, dtype=int)
    residuals = np.full(m, math.inf)
    converged = np.zeros(m, dtype=bool)
    active = np.arange(m)
    oppT = opp.T
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, max_iter + 1):
            Ua = U[:, active]
            R = 1.0 + sign * (oppT @ Ua)
            a = a_values[active]
            AR = np.minimum(R * a, _EXP_LIMIT)
            growth = np.expm1(AR)
            denom = 1.0 + R * growth
            S = (growth * (AR + 1.0) + AR) / denom / denom
            S[(AR >= _EXP_LIMIT) | ~np.isfinite(denom)] = 0.0
            U_next = transfer @ (S * (-sign * penalties[active]))
            D = U_next - Ua
            res = np.sqrt(np.einsum("ij,ij->j", D, D))
            if not np.all(np.isfinite(res)):
                raise DivergenceError(f"{side} subproblem produced a non-finite iterate", t)
            U[:, active] = U_next
            iterations[active] = t
            residuals[active] = res
            done = res < eta
            converged[active[done]] = True
            active = active[~done]
            if active.size == 0:
                break
    return U, iterations, residuals, converged


def solve_design(design, hp, init=None, transfers=None, method="direct"):
    """Run both fixed-point iterations on a prepared design.

    ``transfers`` may supply precomputed ``(positive, negative)`` transfer
    matrices, which is how grid search shares factorizations between cells.
    Returns ``(u1, u2, report)`` with ``u = [w; b]``.
    """
    start = time.perf_counter()
    init = (None, None) if init is None else init
    if transfers is None:
        transfers = (
            transfer_matrix(design, "positive", hp.c1, method),
            transfer_matrix(design, "negative", hp.c3, method),
        )
    u1, rep_pos = _iterate(transfers[0], design, hp, "positive", init[0])
    u2, rep_neg = _iterate(transfers[1], design, hp, "negative", init[1])
    report = SolverReport(rep_pos, rep_neg, time.perf_counter() - start)
    if not report.converged:
        log.debug(
            "fixed point not reached within %d iterations (residuals %.3g, %.3g)",
            hp.max_iter, rep_pos.final_residual, rep_neg.final_residual,
        )
    return u1, u2, report


def fit_linear(X_plus, X_minus, hp=None, init=None):
    """Fit the linear model; returns ``(LinearModel, SolverReport)``."""
    hp = HyperParams() if hp is None else hp
    if hp.kernel is not None:
        raise InvalidArgumentError("fit_linear needs hp.kernel = None; use fit_kernel")
    start = time.perf_counter()
    design = build_linear_design(X_plus, X_minus)
    u1, u2, report = solve_design(design, hp, init=init, method="direct")
    model = LinearModel(u1[:-1], u1[-1], u2[:-1], u2[-1])
    return model, replace(report, wall_time=time.perf_counter() - start)


def kernel_design(X_plus, X_minus, spec):
    """``(design, support, gram)`` for the kernel problem."""
    X_plus, X_minus = _split_inputs(X_plus, X_minus)
    support = np.vstack([X_plus, X_minus])
    K = gram(support, support, spec)
    lp = X_plus.shape[0]
    pos = np.vstack([K[:lp].T, np.ones((1, lp))])
    neg = np.vstack([K[lp:].T, np.ones((1, K.shape[0] - lp))])
    pos.setflags(write=False)
    neg.setflags(write=False)
    return AugmentedDesign(pos, neg), support, K


def fit_kernel(X_plus, X_minus, hp, init=None):
    """Fit the kernel model; returns ``(KernelModel, SolverReport)``."""
    if hp.kernel is None:
        raise InvalidArgumentError("fit_kernel needs hp.kernel to be set")
    start = time.perf_counter()
    design, support, K = kernel_design(X_plus, X_minus, hp.kernel)
    v1, v2, report = solve_design(design, hp, init=init, method="smw")
    model = KernelModel(v1[:-1], v1[-1], v2[:-1], v2[-1], support, hp.kernel, gram_cache=K)
    return model, replace(report, wall_time=time.perf_counter() - start)


def fit(X_plus, X_minus, hp, init=None):
    """Dispatch to :func:`fit_linear` or :func:`fit_kernel` on ``hp.kernel``."""
    if hp.kernel is None:
        return fit_linear(X_plus, X_minus, hp, init)
    return fit_kernel(X_plus, X_minus, hp, init)
