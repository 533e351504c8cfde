"""Ground-truth checks that share no numerics with the relaxation solver.

The sigmoid here is scipy's ``expit`` and tangency is found by plain
bisection, so agreement with :mod:`alphasig.relaxation` is meaningful.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit, logit

from .dual_verifier import VerifyConfig, run_alpha_sig
from .model import VerificationProblem, forward

__all__ = [
    "OracleReport",
    "sample_min",
    "grid_min",
    "bound_validity_scan",
    "tangency_bisection",
    "tangent_intercept",
    "static_baseline",
    "CORNER_DIM_LIMIT",
]

CORNER_DIM_LIMIT = 12
SOUNDNESS_SLACK = 1e-9


@dataclass
class OracleReport:
    sampled_min: float
    argmin: list
    samples: int
    violations: int = 0
    max_violation: float = -math.inf
    bound: float | None = None

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")


def _f(prob, x):
    return forward(prob.net, x) @ prob.c


def _ball_samples(rng, n, d, radius):
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.uniform(size=(n, 1)) ** (1.0 / d)
    return g * r


def sample_min(prob: VerificationProblem, n: int = 100_000, seed: int = 0, bound: float | None = None,
               chunk: int = 50_000) -> OracleReport:
    """Minimum of ``c @ net(x)`` over uniform samples of the input set.

    Box corners are added for the infinity norm when the input has at most
    ``CORNER_DIM_LIMIT`` dimensions.  With ``bound`` given, every sample below
    ``bound - 1e-9`` counts as a violation.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    d = prob.net.input_dim
    rng = np.random.default_rng(seed)
    best, arg = math.inf, None
    viol, worst = 0, -math.inf

    def consume(xs):
        nonlocal best, arg, viol, worst
        vals = _f(prob, xs)
        k = int(np.argmin(vals))
        if vals[k] < best:
            best, arg = float(vals[k]), xs[k].tolist()
        if bound is not None:
            gap = bound - vals
            viol += int(np.count_nonzero(gap > SOUNDNESS_SLACK))
            worst = max(worst, float(gap.max()))

    total = 0
    remaining = n
    while remaining > 0:
        m = min(chunk, remaining)
        if prob.p == math.inf:
            xs = prob.x0 + prob.epsilon * rng.uniform(-1.0, 1.0, size=(m, d))
        else:
            xs = prob.x0 + _ball_samples(rng, m, d, prob.epsilon)
        consume(xs)
        total += m
        remaining -= m
    if prob.p == math.inf and d <= CORNER_DIM_LIMIT:
        corners = np.array(list(itertools.product((-1.0, 1.0), repeat=d)))
        consume(prob.x0 + prob.epsilon * corners)
        total += len(corners)
    return OracleReport(best, arg, total, viol, worst, bound)


def grid_min(prob: VerificationProblem, points_per_dim: int = 1001) -> float:
    """Dense-grid minimum over the input box (2-norm problems keep only points in the ball)."""
    d = prob.net.input_dim
    if d > 2:
        raise NotImplementedError("grid_min supports at most two input dimensions")
    axis = np.linspace(-1.0, 1.0, points_per_dim)
    offsets = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    if prob.p != math.inf:
        offsets = offsets[np.linalg.norm(offsets, axis=1) <= 1.0]
    return float(_f(prob, prob.x0 + prob.epsilon * offsets).min())


def tangent_intercept(alpha, role) -> float:
    """Intercept of the tangent with slope ``alpha``, via ``sigma (1 - sigma) = alpha``."""
    root = math.sqrt(max(1.0 - 4.0 * alpha, 0.0))
    p = 0.5 * (1.0 - root) if getattr(role, "value", role) == "lower" else 0.5 * (1.0 + root)
    return p - alpha * float(logit(p))


def bound_validity_scan(x_lo, x_hi, alpha, role, beta=None, points: int = 1001) -> float:
    """Worst violation of a bounding line on a grid over ``[x_lo, x_hi]``.

    ``role`` is ``"lower"`` (line must stay below the sigmoid) or ``"upper"``.
    Without ``beta`` the line is the tangent of slope ``alpha`` on the role's
    side.  A result <= 0 means the line held at every grid point.
    """
    role = getattr(role, "value", role)
    if beta is None:
        beta = tangent_intercept(alpha, role)
    xs = np.linspace(x_lo, x_hi, points)
    gap = alpha * xs + beta - expit(xs)
    return float(gap.max() if role == "lower" else (-gap).max())


def _residual(x, x_a, y_a):
    s = expit(x)
    return s - s * (1.0 - s) * (x - x_a) - y_a


def tangency_bisection(anchor, role, x_other, iterations: int = 200):
    """Tangent point of a line through ``anchor`` by bisection.

    Returns ``(slope, tangent_point)``, or ``None`` when the residual has the
    same sign at both ends of the search interval (the role collapses).
    """
    x_a, y_a = (float(v) for v in anchor)
    if x_a == 0.0:
        return 0.25, 0.0
    role = getattr(role, "value", role)
    if role == "upper":
        lo, hi = 0.0, float(x_other)
    else:
        lo, hi = float(x_other), 0.0
    if lo >= hi:
        return None
    r_lo, r_hi = _residual(lo, x_a, y_a), _residual(hi, x_a, y_a)
    if r_lo * r_hi > 0:
        return None
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        r_mid = _residual(mid, x_a, y_a)
        if (r_mid > 0) == (r_lo > 0):
            lo, r_lo = mid, r_mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    s = expit(x)
    return float(s * (1.0 - s)), x


def static_baseline(prob: VerificationProblem, bounds) -> float:
    """Bound from the initial slopes alone (zero ascent steps)."""
    return run_alpha_sig(prob, bounds, VerifyConfig(steps=0)).bound
