"""Guardian loss, its derivative, and the baseline margin losses.

Every function accepts a scalar or an array of residuals ``r = 1 - y f(x)``
and returns the same shape (a Python float for scalar input).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "LossSpec",
    "gloss",
    "gloss_weight",
    "pinball",
    "huber",
    "correntropy",
    "linex",
    "evaluate",
    "loss_curve",
    "curve_grid",
    "FIGURE_PARAMETERS",
]

# exp() overflows just above 709; past this point the analytic limits are used.
_EXP_LIMIT = 700.0

LOSS_KINDS = ("guardian", "pinball", "huber", "correntropy", "linex")


def _residuals(r):
    arr = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("residuals must be finite")
    return arr


def _positive(name, value):
    if not (isinstance(value, (int, float, np.floating, np.integer)) and math.isfinite(value) and value > 0):
        raise InvalidArgumentError(f"{name} must be a positive finite real, got {value!r}")
    return float(value)


def _shape_param(a):
    # scalar or array of shape parameters broadcasting against r
    if np.ndim(a) == 0:
        return _positive("a", a)
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr) & (arr > 0)):
        raise InvalidArgumentError("a must contain positive finite reals")
    return arr


def _out(arr, like, a=None):
    return float(arr) if np.ndim(like) == 0 and np.ndim(a) == 0 else arr


def _gloss_terms(r, a):
    ar = a * r
    capped = np.minimum(ar, _EXP_LIMIT)
    with np.errstate(over="ignore", invalid="ignore"):
        growth = np.expm1(capped)
        t = r * growth
    return ar, growth, t


def gloss(r, a):
    """Guardian loss ``1 - 1 / (1 + r (exp(a r) - 1))``.

    Bounded in ``[0, 1)``, zero only at ``r = 0``, and heavier on the
    positive side than on the negative side for the same ``|r|``.

    Parameters
    ----------
    r : float or array_like
        Residuals.
    a : float or array_like
        Asymmetry parameter, ``a > 0``; an array broadcasts against ``r``.
    """
    a = _shape_param(a)
    rr = _residuals(r)
    ar, _, t = _gloss_terms(rr, a)
    # t >= 0 everywhere since r and expm1(a r) share a sign
    with np.errstate(over="ignore", invalid="ignore"):
        out = t / (1.0 + t)
    out = np.where((ar > _EXP_LIMIT) | ~np.isfinite(t), 1.0, out)
    return _out(out, r, a)


def gloss_weight(r, a):
    """First derivative of :func:`gloss` with respect to ``r``.

    This is the per-sample weight driving the fixed-point updates. It
    vanishes at the origin and for large ``|r|``, which is what mutes
    outliers during training.
    """
    a = _shape_param(a)
    rr = _residuals(r)
    if np.ndim(a):
        rr, a = np.broadcast_arrays(rr, a)
        a = a.ravel()
    with np.errstate(over="ignore", invalid="ignore"):
        out = _weight_unchecked(np.atleast_1d(rr).ravel(), a)
    return _out(out.reshape(rr.shape), r, a)


def _weight_unchecked(r, a):
    # hot path of the solver: r is a finite 1-d array, a > 0, caller owns errstate
    ar = np.minimum(a * r, _EXP_LIMIT)
    growth = np.expm1(ar)
    # exp(ar)(ar + 1) - 1 written to stay accurate near r = 0
    numer = growth * (ar + 1.0) + ar
    denom = 1.0 + r * growth
    out = numer / denom / denom
    out[(ar >= _EXP_LIMIT) | ~np.isfinite(denom)] = 0.0
    return out


def pinball(r, tau):
    """Pinball loss: ``r`` for ``r > 0`` and ``-tau * r`` otherwise."""
    if not (0.0 <= tau <= 1.0):
        raise InvalidArgumentError(f"tau must lie in [0, 1], got {tau!r}")
    rr = _residuals(r)
    out = np.where(rr > 0, rr, -tau * rr)
    return _out(out, r)


def huber(r, theta):
    """Huber loss, quadratic for ``|r| <= theta`` and linear beyond."""
    theta = _positive("theta", theta)
    rr = _residuals(r)
    ab = np.abs(rr)
    out = np.where(ab <= theta, 0.5 * rr * rr, theta * ab - 0.5 * theta * theta)
    return _out(out, r)


def correntropy(r, rho, lam):
    """Correntropy-induced loss ``lam * (1 - exp(-r^2 / rho^2))``."""
    rho = _positive("rho", rho)
    lam = _positive("lambda", lam)
    rr = _residuals(r)
    out = -lam * np.expm1(-(rr * rr) / (rho * rho))
    return _out(out, r)


def linex(r, a):
    """LINEX loss ``exp(a r) - a r - 1`` (only ``a > 0`` is supported)."""
    a = _positive("a", a)
    rr = _residuals(r)
    ar = a * rr
    with np.errstate(over="ignore"):
        out = np.expm1(ar) - ar
    return _out(out, r)


@dataclass(frozen=True)
class LossSpec:
    """A loss function together with its parameters.

    Only the parameters relevant to ``kind`` are consulted.
    """

    kind: str = "guardian"
    a: float = 1.0
    tau: float = 0.5
    theta: float = 1.0
    rho: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise InvalidArgumentError(
                f"unknown loss {self.kind!r}; expected one of {', '.join(LOSS_KINDS)}"
            )
        if self.kind in ("guardian", "linex"):
            _positive("a", self.a)
        elif self.kind == "pinball":
            if not (0.0 <= self.tau <= 1.0):
                raise InvalidArgumentError(f"tau must lie in [0, 1], got {self.tau!r}")
        elif self.kind == "huber":
            _positive("theta", self.theta)
        else:
            _positive("rho", self.rho)
            _positive("lambda", self.lam)

    def label(self):
        params = {
            "guardian": f"a={self.a:g}",
            "linex": f"a={self.a:g}",
            "pinball": f"tau={self.tau:g}",
            "huber": f"theta={self.theta:g}",
            "correntropy": f"rho={self.rho:g}, lambda={self.lam:g}",
        }[self.kind]
        return f"{self.kind} ({params})"


def evaluate(spec, r):
    """Evaluate the loss described by ``spec`` at ``r``."""
    if spec.kind == "guardian":
        return gloss(r, spec.a)
    if spec.kind == "pinball":
        return pinball(r, spec.tau)
    if spec.kind == "huber":
        return huber(r, spec.theta)
    if spec.kind == "correntropy":
        return correntropy(r, spec.rho, spec.lam)
    return linex(r, spec.a)


def curve_grid(r_min, r_max, step):
    """Grid points ``r_min, r_min + step, ...`` not exceeding ``r_max``.

    ``r_max`` itself is included when the span is an integer multiple of
    ``step`` to within a relative tolerance of 1e-12.
    """
    values = (r_min, r_max, step)
    if not all(math.isfinite(v) for v in values):
        raise InvalidArgumentError("curve bounds and step must be finite")
    if step <= 0:
        raise InvalidArgumentError(f"step must be positive, got {step!r}")
    if r_min > r_max:
        raise InvalidArgumentError(f"r_min ({r_min!r}) exceeds r_max ({r_max!r})")
    if r_min == r_max:
        return np.array([float(r_min)])
    q = (r_max - r_min) / step
    k = round(q)
    if abs(q - k) <= 1e-12 * max(1.0, abs(q)):
        # linspace pins both endpoints and keeps symmetric grids exact at 0
        return np.linspace(r_min, r_max, k + 1)
    count = math.floor(q) + 1
    return r_min + step * np.arange(count)


def loss_curve(spec, r_min, r_max, step):
    """Tabulate ``spec`` on a regular grid.

    Returns a list of ``(r, loss)`` tuples.
    """
    grid = curve_grid(r_min, r_max, step)
    losses = np.asarray(evaluate(spec, grid), dtype=float)
    return [(float(r), float(v)) for r, v in zip(grid, losses)]


# Parameter sets shown in the loss-curve figure, panel by panel.
FIGURE_PARAMETERS = {
    "pinball": [LossSpec("pinball", tau=t) for t in (0.0, 0.2, 0.5)],
    "huber": [LossSpec("huber", theta=t) for t in (0.5, 1.0)],
    "correntropy": [LossSpec("correntropy", rho=p) for p in (0.5, 1.0, 1.5)],
    "linex": [LossSpec("linex", a=v) for v in (0.5, 1.0, 1.5)],
    "guardian": [LossSpec("guardian", a=v) for v in (0.5, 1.0, 1.5, 2.0)],
}
