"""Interval bound propagation of the input box through the hidden layers."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import SIGMOID, VerificationProblem
from .relaxation import sigmoid

__all__ = ["ActivationBoundSet", "input_box", "ibp_layer", "compute_activation_bounds"]


@dataclass(frozen=True)
class ActivationBoundSet:
    """Pre-activation intervals for every hidden layer (all layers but the last).

    ``activations[i]`` records whether layer ``i`` is sigmoid or linear, so the
    post-activation bounds can be derived on demand.
    """

    pre_lo: tuple[np.ndarray, ...]
    pre_hi: tuple[np.ndarray, ...]
    activations: tuple[str, ...]

    def __len__(self):
        return len(self.pre_lo)

    def post(self, i):
        lo, hi = self.pre_lo[i], self.pre_hi[i]
        if self.activations[i] == SIGMOID:
            return sigmoid(lo), sigmoid(hi)
        return lo, hi

    def to_dict(self, slope_ranges=None):
        layers = []
        for i in range(len(self)):
            entry = {
                "activation": self.activations[i],
                "pre_lo": self.pre_lo[i].tolist(),
                "pre_hi": self.pre_hi[i].tolist(),
            }
            if slope_ranges is not None and slope_ranges[i] is not None:
                entry["slopes"] = slope_ranges[i].to_dict()
            layers.append(entry)
        return {"layers": layers}

    def save(self, path, slope_ranges=None):
        Path(path).write_text(json.dumps(self.to_dict(slope_ranges), indent=1) + "\n")


def input_box(prob: VerificationProblem):
    """Axis-aligned box containing the input set.

    Exact for the infinity norm; for the 2-norm ball it is the enclosing box.
    """
    lo = prob.x0 - prob.epsilon
    hi = prob.x0 + prob.epsilon
    return lo, hi


def ibp_layer(W, b, lo, hi):
    """Bounds on ``W @ x + b`` for ``lo <= x <= hi`` via center/radius form."""
    W = np.asarray(W, dtype=float)
    b = np.asarray(b, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if W.ndim != 2 or W.shape[1] != lo.shape[0] or W.shape[0] != b.shape[0] or lo.shape != hi.shape:
        raise ValueError(f"shape mismatch: W {W.shape}, b {b.shape}, box {lo.shape}/{hi.shape}")
    if np.any(lo > hi):
        raise ValueError("box has lo > hi")
    mid = 0.5 * (hi + lo)
    rad = 0.5 * (hi - lo)
    center = W @ mid + b
    spread = np.abs(W) @ rad
    return center - spread, center + spread


def compute_activation_bounds(prob: VerificationProblem) -> ActivationBoundSet:
    lo, hi = input_box(prob)
    pre_lo, pre_hi, acts = [], [], []
    for layer in prob.net.layers[:-1]:
        l, h = ibp_layer(layer.weights, layer.bias, lo, hi)
        pre_lo.append(l)
        pre_hi.append(h)
        acts.append(layer.activation)
        lo, hi = (sigmoid(l), sigmoid(h)) if layer.activation == SIGMOID else (l, h)
    return ActivationBoundSet(tuple(pre_lo), tuple(pre_hi), tuple(acts))
