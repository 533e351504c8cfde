"""Tunable tangent-line relaxations of the sigmoid.

A line ``alpha * x + beta`` that touches the sigmoid tangentially is fully
determined by its slope and by which side of the inflection point it touches.
Lower bounds touch on the convex half (x < 0), upper bounds on the concave
half (x > 0).  This module holds that slope-to-intercept map, its derivative,
the per-neuron slope limits derived from pre-activation intervals, and the
sequential quadratic solver used to find the steepest admissible slopes.

Every function accepts scalars or numpy arrays and broadcasts.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BoundRole",
    "SlopeRange",
    "TangencyNotFound",
    "sigmoid",
    "sigmoid_family",
    "intercept_of_slope",
    "intercept_grad",
    "chord_slope",
    "sqp_iteration",
    "anchored_tangent_slope",
    "slope_limits",
    "layer_slope_ranges",
    "ALPHA_MIN",
    "ALPHA_MAX",
]

ALPHA_MIN = 1e-12
ALPHA_MAX = 0.25

_SQP_TOL = 1e-10
_SQP_MAX_ITER = 50
_BISECT_ITER = 200
# where |sigma''| peaks; expansions from flatter regions tend to lose the tangent
_SQP_START = float(np.log(2.0 + np.sqrt(3.0)))


class BoundRole(enum.Enum):
    """Which side of the sigmoid an affine bound sits on."""

    LOWER = "lower"
    UPPER = "upper"

    @property
    def sign(self) -> int:
        return 1 if self is BoundRole.LOWER else -1

    @classmethod
    def from_sign(cls, s: float) -> "BoundRole":
        return cls.LOWER if s >= 0 else cls.UPPER


class TangencyNotFound(ArithmeticError):
    """No anchored tangent exists on the requested side (the role collapses to a chord)."""


def _role_sign(role) -> np.ndarray | int:
    if isinstance(role, BoundRole):
        return role.sign
    s = np.asarray(role)
    if not np.all(np.abs(s) == 1):
        raise ValueError("role signs must be +1 (lower) or -1 (upper)")
    return s


def sigmoid(x):
    """Logistic function, evaluated without overflow for large ``|x|``."""
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out[()]


def sigmoid_family(x):
    """Return ``(sigma, sigma', sigma'')`` at ``x``."""
    s = sigmoid(x)
    ds = s * (1.0 - s)
    dds = ds * (1.0 - 2.0 * s)
    return s, ds, dds


def _check_slope(alpha):
    alpha = np.asarray(alpha, dtype=float)
    bad = (alpha <= 0) | (alpha > ALPHA_MAX)
    if np.any(bad) or not np.all(np.isfinite(alpha)):
        raise ValueError(f"slope outside (0, 1/4]: {alpha[bad] if alpha.ndim else alpha}")
    return alpha


def _tangent_offset(alpha):
    # |x| of the two points where sigma' == alpha
    alpha = np.clip(alpha, ALPHA_MIN, ALPHA_MAX)
    return np.arccosh(np.maximum(0.5 / alpha - 1.0, 1.0))


def intercept_of_slope(alpha, role):
    """Intercept ``beta`` that makes ``alpha*x + beta`` tangent to the sigmoid.

    The tangent point is ``-s*z`` with ``z = acosh(1/(2 alpha) - 1)`` and
    ``s = +1`` for a lower bound, ``-1`` for an upper bound.  ``role`` may be a
    :class:`BoundRole` or an array of signs.
    """
    alpha = _check_slope(alpha)
    s = _role_sign(role)
    z = _tangent_offset(alpha)
    beta = sigmoid(-s * z) + s * alpha * z
    return np.asarray(beta)[()]


def intercept_grad(alpha, role):
    """Derivative of :func:`intercept_of_slope` with respect to the slope.

    Equals minus the tangent point, ``s * acosh(1/(2 alpha) - 1)``.
    """
    alpha = _check_slope(alpha)
    s = _role_sign(role)
    return np.asarray(s * _tangent_offset(alpha))[()]


def chord_slope(x_lo, x_hi):
    """Slope of the secant through ``(x_lo, sigma(x_lo))`` and ``(x_hi, sigma(x_hi))``."""
    x_lo = np.asarray(x_lo, dtype=float)
    x_hi = np.asarray(x_hi, dtype=float)
    if np.any(x_lo >= x_hi):
        raise ValueError("chord_slope requires x_lo < x_hi")
    return ((sigmoid(x_hi) - sigmoid(x_lo)) / (x_hi - x_lo))[()]


def sqp_iteration(anchor, x0):
    """One quadratic-expansion step of the anchored tangent solver.

    Expands the sigmoid to second order around ``x0`` and returns the point
    where a line through ``anchor = (x_a, y_a)`` is tangent to that parabola.
    The root on the opposite side of zero from the anchor is taken; if both
    qualify, the one closest to ``x0``.  Vectorized over ``x_a``, ``y_a``, ``x0``.
    Entries without an admissible root come back as NaN; the scalar form
    raises :class:`TangencyNotFound` instead.
    """
    x_a, y_a = (np.asarray(v, dtype=float) for v in anchor)
    x0 = np.asarray(x0, dtype=float)
    s0, ds0, dds0 = sigmoid_family(x0)
    c2 = 0.5 * dds0
    c1 = ds0 - dds0 * x0
    c0 = s0 - ds0 * x0 + 0.5 * dds0 * x0**2
    d2 = c2
    d1 = -2.0 * c2 * x_a
    d0 = y_a - c1 * x_a - c0

    with np.errstate(divide="ignore", invalid="ignore"):
        disc = d1**2 - 4.0 * d2 * d0
        sq = np.sqrt(np.maximum(disc, 0.0))
        q = -0.5 * (d1 + np.where(d1 >= 0, sq, -sq))
        r1 = q / d2
        r2 = d0 / q
        lin = -d0 / d1

    # the anchor sits on one side of the inflection, the tangent point on the other
    side = np.where(x_a < 0, 1.0, np.where(x_a > 0, -1.0, 0.0))

    def ok(r):
        return np.isfinite(r) & ((side == 0) | (r * side > 0))

    ok1, ok2 = ok(r1), ok(r2)
    closer = np.abs(r1 - x0) <= np.abs(r2 - x0)
    quad = np.where(ok1 & ok2, np.where(closer, r1, r2), np.where(ok1, r1, np.where(ok2, r2, np.nan)))
    quad = np.where(disc < 0, np.nan, quad)

    small = np.abs(d2) < 1e-12
    # inflection anchor with x0 = 0: every coefficient vanishes, the anchor is its own tangent
    self_tangent = small & (np.abs(d1) < 1e-15) & (np.abs(d0) < 1e-15)
    lin = np.where(self_tangent, x_a, np.where(ok(lin), lin, np.nan))
    out = np.where(small, lin, quad)

    if out.ndim == 0:
        if not np.isfinite(out):
            raise TangencyNotFound("quadratic step has no admissible root")
        return float(out)
    return out


def _tangency_residual(x, x_a, y_a):
    s, ds, _ = sigmoid_family(x)
    return s - ds * (x - x_a) - y_a


def _bisect_tangent(x_a, y_a, lo, hi):
    # residual is monotone on the far side of the inflection; lo/hi bracket it
    f_lo = _tangency_residual(lo, x_a, y_a)
    for _ in range(_BISECT_ITER):
        mid = 0.5 * (lo + hi)
        f_mid = _tangency_residual(mid, x_a, y_a)
        left = np.sign(f_mid) == np.sign(f_lo)
        lo = np.where(left, mid, lo)
        f_lo = np.where(left, f_mid, f_lo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)


def _anchored_tangent_points(x_a, y_a, x_other, full=False):
    """Vectorized solver; returns tangent points, NaN where no tangency exists.

    With ``full`` also returns the SQP iteration counts and a mask of entries
    that fell back to bisection.
    """
    x_a, y_a, x_other = np.broadcast_arrays(
        np.asarray(x_a, float), np.asarray(y_a, float), np.asarray(x_other, float)
    )
    shape = x_a.shape
    x_a, y_a, x_other = (v.ravel() for v in (x_a, y_a, x_other))

    inflect = x_a == 0
    # search interval on the opposite side of zero, closed at x_other
    lo = np.where(x_a < 0, 0.0, x_other)
    hi = np.where(x_a < 0, x_other, 0.0)
    r_lo = _tangency_residual(lo, x_a, y_a)
    r_hi = _tangency_residual(hi, x_a, y_a)
    bracketed = ~inflect & (np.sign(x_other) == -np.sign(x_a)) & (r_lo * r_hi <= 0)

    start = np.sign(x_other) * np.minimum(np.abs(x_other), _SQP_START)
    x = np.where(bracketed, start, np.nan)
    active = bracketed.copy()
    converged = np.zeros_like(active)
    iters = np.zeros(x.shape, dtype=int)
    for _ in range(_SQP_MAX_ITER):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        nxt = sqp_iteration((x_a[idx], y_a[idx]), x[idx])
        iters[idx] += 1
        bad = ~np.isfinite(nxt) | (nxt < lo[idx]) | (nxt > hi[idx])
        done = ~bad & (np.abs(nxt - x[idx]) < _SQP_TOL)
        x[idx] = np.where(bad, x[idx], nxt)
        active[idx[bad | done]] = False
        converged[idx[done]] = True

    fallback = bracketed & ~converged
    if fallback.any():
        x[fallback] = _bisect_tangent(x_a[fallback], y_a[fallback], lo[fallback], hi[fallback])
    x[inflect] = 0.0
    if full:
        return x.reshape(shape), iters.reshape(shape), fallback.reshape(shape)
    return x.reshape(shape)


def anchored_tangent_slope(anchor, role, x_other, return_info=False):
    """Steepest slope of a ``role`` bound that passes through ``anchor``.

    For an upper bound the anchor is the interval's lower end and the tangent
    point is searched in ``(0, x_other]``; for a lower bound the anchor is the
    upper end and the search runs over ``[x_other, 0)``.  Returns
    ``(alpha, x_tangent)``, plus ``{"iterations", "bisection"}`` when
    ``return_info`` is set.  Raises :class:`TangencyNotFound` if the line
    cannot be made tangent on that side.
    """
    x_a, y_a = (float(v) for v in anchor)
    if isinstance(role, str):
        role = BoundRole(role)
    elif not isinstance(role, BoundRole):
        role = BoundRole.from_sign(role)
    if x_a != 0 and (x_a < 0) != (role is BoundRole.UPPER):
        raise ValueError(f"anchor at {x_a} is on the wrong side of zero for a {role.value} bound")
    x_hat, iters, bisected = _anchored_tangent_points(x_a, y_a, x_other, full=True)
    x_hat = float(x_hat)
    if not np.isfinite(x_hat):
        raise TangencyNotFound(f"no {role.value} tangent through ({x_a}, {y_a}) up to {x_other}")
    alpha = float(sigmoid_family(x_hat)[1])
    if return_info:
        return alpha, x_hat, {"iterations": int(iters), "bisection": bool(bisected)}
    return alpha, x_hat


@dataclass(frozen=True, eq=False)
class SlopeRange:
    """Admissible slopes for the lower and upper bound of one or many neurons.

    Fields are floats for a single neuron or equally shaped arrays.  A
    collapsed role is pinned to the chord; its line is the secant itself
    (intercept ``chord_intercept``) rather than a tangent.
    """

    lo_lower: np.ndarray
    hi_lower: np.ndarray
    lo_upper: np.ndarray
    hi_upper: np.ndarray
    lower_collapsed: np.ndarray
    upper_collapsed: np.ndarray
    chord: np.ndarray
    chord_intercept: np.ndarray

    def bounds(self, role):
        if BoundRole(role) is BoundRole.LOWER:
            return self.lo_lower, self.hi_lower
        return self.lo_upper, self.hi_upper

    def collapsed(self, role):
        return self.lower_collapsed if BoundRole(role) is BoundRole.LOWER else self.upper_collapsed

    def to_dict(self):
        return {k: np.asarray(v).tolist() for k, v in self.__dict__.items()}


def _slope_limits(x_lo, x_hi, allow_degenerate):
    x_lo = np.asarray(x_lo, dtype=float)
    x_hi = np.asarray(x_hi, dtype=float)
    x_lo, x_hi = np.broadcast_arrays(x_lo, x_hi)
    if not (np.all(np.isfinite(x_lo)) and np.all(np.isfinite(x_hi))):
        raise ValueError("slope limits need finite interval ends")
    degenerate = x_lo >= x_hi
    if np.any(x_lo > x_hi) or (not allow_degenerate and np.any(degenerate)):
        raise ValueError("slope_limits requires x_lo < x_hi")

    s_lo, ds_lo, _ = sigmoid_family(x_lo)
    s_hi, ds_hi, _ = sigmoid_family(x_hi)
    dx = x_hi - x_lo
    with np.errstate(divide="ignore", invalid="ignore"):
        chord = np.where(degenerate, ds_lo, (s_hi - s_lo) / dx)
    chord_b = np.where(degenerate, s_lo - ds_lo * x_lo, s_lo - chord * x_lo)

    # tangent at x_hi fails to clear the curve at x_lo -> static upper chord
    upper_c = ~degenerate & (s_hi - ds_hi * dx <= s_lo)
    lower_c = ~degenerate & (s_lo + ds_lo * dx >= s_hi)

    hi_u = np.full(x_lo.shape, ALPHA_MAX)
    need_u = ~degenerate & ~upper_c & (x_lo < 0)
    if need_u.any():
        pts = _anchored_tangent_points(x_lo[need_u], s_lo[need_u], x_hi[need_u])
        hi_u[need_u] = sigmoid_family(pts)[1]
    hi_l = np.full(x_lo.shape, ALPHA_MAX)
    need_l = ~degenerate & ~lower_c & (x_hi > 0)
    if need_l.any():
        pts = _anchored_tangent_points(x_hi[need_l], s_hi[need_l], x_lo[need_l])
        hi_l[need_l] = sigmoid_family(pts)[1]

    # an unbracketed solve falls back to the shallowest slope, which is always valid
    hi_u = np.where(np.isfinite(hi_u), hi_u, 0.0)
    hi_l = np.where(np.isfinite(hi_l), hi_l, 0.0)
    lo_l = np.clip(ds_lo, ALPHA_MIN, ALPHA_MAX)
    lo_u = np.clip(ds_hi, ALPHA_MIN, ALPHA_MAX)
    hi_l = np.clip(hi_l, lo_l, ALPHA_MAX)
    hi_u = np.clip(hi_u, lo_u, ALPHA_MAX)

    fixed_l = lower_c | degenerate
    fixed_u = upper_c | degenerate
    lo_l = np.where(fixed_l, chord, lo_l)
    hi_l = np.where(fixed_l, chord, hi_l)
    lo_u = np.where(fixed_u, chord, lo_u)
    hi_u = np.where(fixed_u, chord, hi_u)

    fields = (lo_l, hi_l, lo_u, hi_u, fixed_l, fixed_u, chord, chord_b)
    if x_lo.ndim == 0:
        fields = tuple(v.item() for v in fields)
    return SlopeRange(*fields)


def slope_limits(x_lo, x_hi):
    """Slope intervals of both roles for pre-activations in ``[x_lo, x_hi]``.

    The shallowest slopes are the derivatives at the far ends.  The steepest
    ones come from the anchored tangent solver.  A role whose end tangent does
    not clear the curve at the opposite end collapses onto the chord.
    """
    return _slope_limits(x_lo, x_hi, allow_degenerate=False)


def layer_slope_ranges(pre_lo, pre_hi):
    """:func:`slope_limits` for a whole layer, tolerating ``x_lo == x_hi``.

    Degenerate neurons get the tangent at that point for both roles, stored
    as a collapsed role whose chord is the tangent.
    """
    return _slope_limits(pre_lo, pre_hi, allow_degenerate=True)
