"""Projected gradient ascent over tangent-line slopes (alpha-sig).

For fixed slopes, the relaxed network is affine in the input, ``g1 @ x + g2``,
and its minimum over the norm ball has a closed form through the dual norm.
The slopes are tuned by Adam ascent on that closed form and clipped to their
admissible ranges after every step.  Each sigmoid neuron carries two slopes,
one used while it is lower-bounded and one while it is upper-bounded; the
sign of the coefficient propagated backward from ``c`` decides which is live.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .interval_bounds import ActivationBoundSet
from .model import SIGMOID, NeuralNet, VerificationProblem
from .relaxation import (
    ALPHA_MAX,
    SlopeRange,
    intercept_grad,
    intercept_of_slope,
    layer_slope_ranges,
    sigmoid_family,
)

__all__ = [
    "VerifyConfig",
    "RelaxationState",
    "VerifyResult",
    "backward_signs",
    "assemble_linear",
    "dual_objective",
    "relaxed_objective",
    "ascend_gradient",
    "clip_alphas",
    "compute_slope_ranges",
    "init_state",
    "run_alpha_sig",
    "tau_compare",
    "write_trace_csv",
]


@dataclass
class VerifyConfig:
    steps: int = 300
    lr: float = 0.05
    lr_decay: float = 0.98
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    # stop once the objective moves less than this between steps; None runs the full budget
    tol: float | None = None

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if not self.lr > 0:
            raise ValueError("lr must be positive")


@dataclass
class RelaxationState:
    """Slopes and Adam moments, one entry per hidden layer (``None`` for linear layers)."""

    alpha_lower: list
    alpha_upper: list
    m_lower: list = field(default_factory=list)
    v_lower: list = field(default_factory=list)
    m_upper: list = field(default_factory=list)
    v_upper: list = field(default_factory=list)
    step: int = 0

    def __post_init__(self):
        def zeros():
            return [None if a is None else np.zeros_like(a) for a in self.alpha_lower]

        for name in ("m_lower", "v_lower", "m_upper", "v_upper"):
            if not getattr(self, name):
                setattr(self, name, zeros())

    def snapshot(self):
        copy = lambda xs: [None if a is None else a.copy() for a in xs]  # noqa: E731
        return copy(self.alpha_lower), copy(self.alpha_upper)


@dataclass
class VerifyResult:
    bound: float
    trace: np.ndarray
    best_trace: np.ndarray
    wall_ms: np.ndarray
    best_iteration: int
    alpha_lower: list
    alpha_upper: list
    wall_time: float
    iterations_run: int

    def to_dict(self):
        return {
            "bound": self.bound,
            "best_iteration": self.best_iteration,
            "iterations_run": self.iterations_run,
            "wall_time": self.wall_time,
            "trace": self.trace.tolist(),
        }


@dataclass
class _Sweep:
    g1: np.ndarray
    g2: float
    signs: list
    coeffs: list  # coefficient on each hidden layer's post-activation
    alpha: list  # live slope per neuron
    beta: list
    dbeta: list


def _live_lines(alpha_l, alpha_u, s, rng: SlopeRange | None):
    alpha = np.where(s > 0, alpha_l, alpha_u)
    if rng is None:
        collapsed = np.zeros(alpha.shape, dtype=bool)
    else:
        collapsed = np.where(s > 0, rng.lower_collapsed, rng.upper_collapsed)
    safe = np.where(collapsed, ALPHA_MAX, alpha)
    beta = intercept_of_slope(safe, s)
    dbeta = intercept_grad(safe, s)
    if rng is not None:
        alpha = np.where(collapsed, rng.chord, alpha)
        beta = np.where(collapsed, rng.chord_intercept, beta)
        dbeta = np.where(collapsed, 0.0, dbeta)
    return alpha, np.atleast_1d(beta), np.atleast_1d(dbeta)


def _sweep(net: NeuralNet, c, state: RelaxationState, ranges=None, signs=None) -> _Sweep:
    layers = net.layers
    n_hidden = len(layers) - 1
    out = layers[-1]
    a = out.weights.T @ c
    g2 = float(c @ out.bias)
    res_signs = [None] * n_hidden
    coeffs = [None] * n_hidden
    alphas = [None] * n_hidden
    betas = [None] * n_hidden
    dbetas = [None] * n_hidden
    for i in range(n_hidden - 1, -1, -1):
        layer = layers[i]
        coeffs[i] = a
        if layer.activation == SIGMOID:
            s = np.where(a >= 0, 1, -1) if signs is None else signs[i]
            rng = None if ranges is None else ranges[i]
            alpha, beta, dbeta = _live_lines(state.alpha_lower[i], state.alpha_upper[i], s, rng)
            res_signs[i], alphas[i], betas[i], dbetas[i] = s, alpha, beta, dbeta
            g2 += float(a @ beta)
            u = a * alpha
        else:
            u = a
        g2 += float(u @ layer.bias)
        a = layer.weights.T @ u
    return _Sweep(a, g2, res_signs, coeffs, alphas, betas, dbetas)


def backward_signs(net: NeuralNet, c, state: RelaxationState) -> list:
    """Per hidden layer, +1 where the neuron is lower-bounded and -1 where upper-bounded.

    A coefficient of exactly zero counts as +1.  Linear hidden layers get ``None``.
    """
    return _sweep(net, np.asarray(c, float), state).signs


def assemble_linear(net: NeuralNet, c, state: RelaxationState, signs=None, ranges=None):
    """Collapse the relaxed network into ``(g1, g2)`` with ``g1 @ x + g2 <= c @ net(x)``.

    ``signs`` defaults to the ones from :func:`backward_signs`.  With ``ranges``
    given, collapsed roles use their chord line instead of a tangent.
    """
    sw = _sweep(net, np.asarray(c, float), state, ranges, signs)
    return sw.g1, sw.g2


def _dual_norm(g1, p):
    return float(np.abs(g1).sum()) if p == math.inf else float(np.linalg.norm(g1))


def dual_objective(g1, g2, x0, epsilon, p=math.inf) -> float:
    """Minimum of ``g1 @ x + g2`` over ``||x - x0||_p <= epsilon``."""
    p = math.inf if p in ("inf", "infinity") else (2 if p in ("two", "2") else p)
    if p not in (2, math.inf):
        raise ValueError(f"unsupported norm {p!r}")
    g1 = np.asarray(g1, float)
    return float(g1 @ np.asarray(x0, float)) - epsilon * _dual_norm(g1, p) + float(g2)


def _worst_input(g1, prob: VerificationProblem):
    if prob.p == math.inf:
        d = np.sign(g1)
    else:
        n = np.linalg.norm(g1)
        # zero subgradient at the kink
        d = g1 / n if n > 0 else np.zeros_like(g1)
    return prob.x0 - prob.epsilon * d


def relaxed_objective(prob: VerificationProblem, state: RelaxationState, ranges=None, signs=None):
    """Value and slope gradient of the dual objective.

    Returns ``(value, grad_lower, grad_upper, signs)``.  The gradient is the
    adjoint of the backward sweep, which amounts to a forward pass of the
    relaxed network from the minimizing input.  Gradients of roles that are
    not live, or are pinned to a chord, are zero.
    """
    net = prob.net
    sw = _sweep(net, prob.c, state, ranges, signs)
    value = dual_objective(sw.g1, sw.g2, prob.x0, prob.epsilon, prob.p)

    x = _worst_input(sw.g1, prob)
    grad_l = [None if a is None else np.zeros_like(a) for a in state.alpha_lower]
    grad_u = [None if a is None else np.zeros_like(a) for a in state.alpha_upper]
    for i, layer in enumerate(net.layers[:-1]):
        pre = layer.weights @ x + layer.bias
        if layer.activation == SIGMOID:
            g = sw.coeffs[i] * (pre + sw.dbeta[i])
            lower = sw.signs[i] > 0
            grad_l[i] = np.where(lower, g, 0.0)
            grad_u[i] = np.where(lower, 0.0, g)
            if ranges is not None:
                grad_l[i][np.asarray(ranges[i].lower_collapsed, bool)] = 0.0
                grad_u[i][np.asarray(ranges[i].upper_collapsed, bool)] = 0.0
            x = sw.alpha[i] * pre + sw.beta[i]
        else:
            x = pre
    return value, grad_l, grad_u, sw.signs


def ascend_gradient(state: RelaxationState, grad_lower, grad_upper, config: VerifyConfig | None = None):
    """One Adam ascent step on every slope, in place.  Returns ``state``."""
    cfg = config or VerifyConfig()
    state.step += 1
    t = state.step
    lr = cfg.lr * cfg.lr_decay ** (t - 1)
    b1, b2 = cfg.beta1, cfg.beta2
    for alphas, ms, vs, grads in (
        (state.alpha_lower, state.m_lower, state.v_lower, grad_lower),
        (state.alpha_upper, state.m_upper, state.v_upper, grad_upper),
    ):
        for i, g in enumerate(grads):
            if g is None:
                continue
            ms[i] = b1 * ms[i] + (1 - b1) * g
            vs[i] = b2 * vs[i] + (1 - b2) * g * g
            m_hat = ms[i] / (1 - b1**t)
            v_hat = vs[i] / (1 - b2**t)
            alphas[i] = alphas[i] + lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
    return state


def clip_alphas(state: RelaxationState, ranges, signs=None):
    """Project both slope sets into their admissible intervals, in place.

    Each role is clipped to its own interval regardless of ``signs``, so the
    inactive slope is always ready for a sign flip.
    """
    for i, rng in enumerate(ranges):
        if rng is None:
            continue
        state.alpha_lower[i] = np.clip(state.alpha_lower[i], rng.lo_lower, rng.hi_lower)
        state.alpha_upper[i] = np.clip(state.alpha_upper[i], rng.lo_upper, rng.hi_upper)
    return state


def compute_slope_ranges(net: NeuralNet, bounds: ActivationBoundSet) -> list:
    n_hidden = len(net.layers) - 1
    if len(bounds) != n_hidden:
        raise ValueError(f"bounds cover {len(bounds)} layers, network has {n_hidden} hidden layers")
    ranges = []
    for i, layer in enumerate(net.layers[:-1]):
        lo, hi = bounds.pre_lo[i], bounds.pre_hi[i]
        if lo.shape != (layer.out_dim,) or hi.shape != (layer.out_dim,):
            raise ValueError(f"bounds for layer {i} have shape {lo.shape}, expected ({layer.out_dim},)")
        ranges.append(layer_slope_ranges(lo, hi) if layer.activation == SIGMOID else None)
    return ranges


def init_state(bounds: ActivationBoundSet, ranges) -> RelaxationState:
    """Start every slope at the tangent slope of the interval midpoint, clipped per role."""
    lower, upper = [], []
    for i, rng in enumerate(ranges):
        if rng is None:
            lower.append(None)
            upper.append(None)
            continue
        mid = 0.5 * (bounds.pre_lo[i] + bounds.pre_hi[i])
        a0 = sigmoid_family(mid)[1]
        lower.append(np.clip(a0, rng.lo_lower, rng.hi_lower))
        upper.append(np.clip(a0, rng.lo_upper, rng.hi_upper))
    return RelaxationState(lower, upper)


def run_alpha_sig(prob: VerificationProblem, bounds: ActivationBoundSet, config: VerifyConfig | None = None, callback=None):
    """Maximize the relaxed lower bound over the slopes.

    Iteration 0 evaluates the initial slopes; each further iteration takes one
    ascent step and clips.  The reported bound is the best objective seen,
    so ``steps=0`` gives the static (initialization-only) bound.
    ``callback(k, value, state)`` is called after every evaluation.
    """
    cfg = config or VerifyConfig()
    t0 = time.perf_counter()
    ranges = compute_slope_ranges(prob.net, bounds)
    state = init_state(bounds, ranges)

    trace, best_trace, wall = [], [], []
    best = -math.inf
    best_k = 0
    best_alpha = state.snapshot()
    prev = None
    for k in range(cfg.steps + 1):
        value, g_l, g_u, signs = relaxed_objective(prob, state, ranges)
        trace.append(value)
        if value > best:
            best, best_k, best_alpha = value, k, state.snapshot()
        best_trace.append(best)
        wall.append(1e3 * (time.perf_counter() - t0))
        if callback is not None:
            callback(k, value, state)
        if k == cfg.steps or (cfg.tol is not None and prev is not None and abs(value - prev) < cfg.tol):
            break
        prev = value
        ascend_gradient(state, g_l, g_u, cfg)
        clip_alphas(state, ranges, signs)

    return VerifyResult(
        bound=best,
        trace=np.array(trace),
        best_trace=np.array(best_trace),
        wall_ms=np.array(wall),
        best_iteration=best_k,
        alpha_lower=best_alpha[0],
        alpha_upper=best_alpha[1],
        wall_time=time.perf_counter() - t0,
        iterations_run=len(trace) - 1,
    )


def tau_compare(bound_new: float, bound_ref: float) -> float:
    """Percent change of ``bound_new`` relative to ``bound_ref``; positive means tighter.

    Undefined (NaN) for a zero reference.
    """
    if bound_ref == 0:
        return math.nan
    return 100.0 * (bound_new - bound_ref) / abs(bound_ref)


def write_trace_csv(result: VerifyResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "objective", "best_so_far", "wall_ms"])
        for k, (v, b, ms) in enumerate(zip(result.trace, result.best_trace, result.wall_ms)):
            w.writerow([k, repr(float(v)), repr(float(b)), f"{ms:.3f}"])
