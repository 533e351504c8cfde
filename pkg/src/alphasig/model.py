"""Dense feedforward networks with sigmoid hidden layers and a linear head."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .relaxation import sigmoid

__all__ = [
    "SIGMOID",
    "LINEAR",
    "Layer",
    "NeuralNet",
    "VerificationProblem",
    "ModelFormatError",
    "ModelValidationError",
    "generate_random",
    "forward",
    "objective_eval",
    "save_model",
    "load_model",
    "net_to_dict",
    "net_from_dict",
]

SIGMOID = "sigmoid"
LINEAR = "linear"
_ACTIVATIONS = (SIGMOID, LINEAR)
_NORMS = {"inf": math.inf, "infinity": math.inf, "two": 2, "2": 2}


class ModelFormatError(ValueError):
    """A model file could not be parsed."""


class ModelValidationError(ValueError):
    """A model parsed but its layers are inconsistent."""


def _frozen(a, ndim, what):
    a = np.array(a, dtype=float)
    if a.ndim != ndim:
        raise ModelValidationError(f"{what} must be {ndim}-dimensional, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ModelValidationError(f"{what} has non-finite entries")
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Layer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = SIGMOID

    def __post_init__(self):
        w = _frozen(self.weights, 2, "weights")
        b = _frozen(self.bias, 1, "bias")
        if w.shape[0] != b.shape[0]:
            raise ModelValidationError(f"weights have {w.shape[0]} rows but bias has {b.shape[0]} entries")
        if self.activation not in _ACTIVATIONS:
            raise ModelValidationError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Layer):
            return NotImplemented
        return (
            self.activation == other.activation
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.bias, other.bias)
        )


@dataclass(frozen=True, eq=False)
class NeuralNet:
    """Ordered stack of dense layers; the last one must be linear."""

    layers: tuple[Layer, ...]
    input_dim: int

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise ModelValidationError("a network needs at least one layer")
        if int(self.input_dim) <= 0:
            raise ModelValidationError("input_dim must be positive")
        width = int(self.input_dim)
        for i, layer in enumerate(layers):
            if layer.in_dim != width:
                raise ModelValidationError(
                    f"layer {i} expects {layer.in_dim} inputs but receives {width}"
                )
            width = layer.out_dim
        if layers[-1].activation != LINEAR:
            raise ModelValidationError(f"layer {len(layers) - 1} (output) must be linear")

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def widths(self) -> list[int]:
        return [self.input_dim] + [layer.out_dim for layer in self.layers]

    def __eq__(self, other):
        if not isinstance(other, NeuralNet):
            return NotImplemented
        return self.input_dim == other.input_dim and self.layers == other.layers


@dataclass(frozen=True, eq=False)
class VerificationProblem:
    """Minimize ``c @ net(x)`` over ``||x - x0||_p <= epsilon``.

    ``p`` is ``math.inf`` or ``2``; the strings ``"inf"`` and ``"two"`` are accepted.
    """

    net: NeuralNet
    c: np.ndarray
    x0: np.ndarray
    epsilon: float
    p: float = math.inf

    def __post_init__(self):
        c = _frozen(self.c, 1, "c")
        x0 = _frozen(self.x0, 1, "x0")
        if c.shape[0] != self.net.output_dim:
            raise ValueError(f"c has length {c.shape[0]}, network output is {self.net.output_dim}")
        if x0.shape[0] != self.net.input_dim:
            raise ValueError(f"x0 has length {x0.shape[0]}, network input is {self.net.input_dim}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        p = self.p
        if isinstance(p, str):
            if p.lower() not in _NORMS:
                raise ValueError(f"unsupported norm {p!r}")
            p = _NORMS[p.lower()]
        if p not in (2, math.inf):
            raise ValueError(f"unsupported norm {p!r}; use 2 or inf")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "p", p)

    @property
    def dual_q(self) -> float:
        return 1.0 if self.p == math.inf else 2.0


def generate_random(
    layer_widths: Sequence[int],
    weight_std: float,
    bias_std: float,
    seed: int,
) -> NeuralNet:
    """Draw a network with i.i.d. normal weights and biases.

    Uses numpy's PCG64 bit generator and its ziggurat normal sampler, so a
    given seed always yields the same network.  Layers are sampled in order,
    weights (row-major) before bias.  Hidden layers are sigmoid, the last is
    linear.
    """
    widths = [int(w) for w in layer_widths]
    if len(widths) < 2 or any(w <= 0 for w in widths):
        raise ValueError("layer_widths needs at least two positive entries")
    if not (weight_std > 0 and bias_std > 0):
        raise ValueError("standard deviations must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    layers = []
    for i, (n_in, n_out) in enumerate(zip(widths[:-1], widths[1:])):
        w = weight_std * rng.standard_normal((n_out, n_in))
        b = bias_std * rng.standard_normal(n_out)
        act = LINEAR if i == len(widths) - 2 else SIGMOID
        layers.append(Layer(w, b, act))
    return NeuralNet(tuple(layers), widths[0])


def _activate(layer: Layer, z):
    return sigmoid(z) if layer.activation == SIGMOID else z


def forward(net: NeuralNet, x) -> np.ndarray:
    """Evaluate the network on one input vector or a batch of row vectors."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.input_dim:
        raise ValueError(f"input has trailing dimension {x.shape[-1]}, network expects {net.input_dim}")
    for layer in net.layers:
        x = _activate(layer, x @ layer.weights.T + layer.bias)
    return x


def objective_eval(prob: VerificationProblem, x) -> np.ndarray | float:
    """``c @ net(x)``; batched inputs give one value per row."""
    out = forward(prob.net, x) @ prob.c
    return out[()] if np.ndim(out) else float(out)


def net_to_dict(net: NeuralNet) -> dict:
    return {
        "input_dim": net.input_dim,
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation,
            }
            for layer in net.layers
        ],
    }


def net_from_dict(data) -> NeuralNet:
    if not isinstance(data, dict):
        raise ModelFormatError("model root must be a JSON object")
    if "input_dim" not in data:
        raise ModelFormatError("missing field 'input_dim'")
    if not isinstance(data.get("layers"), list):
        raise ModelFormatError("missing or non-list field 'layers'")
    layers = []
    for i, entry in enumerate(data["layers"]):
        if not isinstance(entry, dict):
            raise ModelFormatError(f"layers[{i}] must be an object")
        for key in ("weights", "bias", "activation"):
            if key not in entry:
                raise ModelFormatError(f"layers[{i}]: missing field '{key}'")
        try:
            layers.append(Layer(entry["weights"], entry["bias"], entry["activation"]))
        except (TypeError, ValueError) as exc:
            raise ModelValidationError(f"layers[{i}]: {exc}") from exc
    input_dim = data["input_dim"]
    if not isinstance(input_dim, int):
        raise ModelFormatError("'input_dim' must be an integer")
    return NeuralNet(tuple(layers), input_dim)


def save_model(net: NeuralNet, path) -> None:
    # json writes floats with repr(), the shortest string that round-trips exactly
    Path(path).write_text(json.dumps(net_to_dict(net)) + "\n")


def load_model(path) -> NeuralNet:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return net_from_dict(data)
