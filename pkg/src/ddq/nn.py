"""Minimal feed-forward network engine in float64 numpy.

Dense layers with tanh/linear/softmax/sigmoid activations, analytic
backpropagation, plain SGD, parameter cloning for target networks, and a
versioned checkpoint format. Gradients are accumulated as sums over the batch
rows; callers fold any 1/N into the output-gradient they pass to `backward`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, TrainingError

ACTIVATIONS = ("tanh", "linear", "softmax", "sigmoid")

CHECKPOINT_FORMAT_VERSION = 1

_EPS = 1e-12


@dataclass(frozen=True)
class LayerSpec:
    input_dim: int
    output_dim: int
    activation: str = "tanh"

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("layer dims must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


class NetworkParams:
    """Per-layer weight matrices (out, in) and bias vectors (out,)."""

    def __init__(self, specs: tuple[LayerSpec, ...], weights, biases):
        self.specs = tuple(specs)
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        for spec, w, b in zip(self.specs, self.weights, self.biases, strict=True):
            if w.shape != (spec.output_dim, spec.input_dim) or b.shape != (spec.output_dim,):
                raise DimensionMismatchError(
                    f"layer shapes {w.shape}/{b.shape} do not match spec {spec}"
                )

    @property
    def input_dim(self) -> int:
        return self.specs[0].input_dim

    @property
    def output_dim(self) -> int:
        return self.specs[-1].output_dim

    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def param_hash(self) -> int:
        """Order-stable content hash, used by audit tests to detect mutation."""
        h = 0
        for w, b in zip(self.weights, self.biases):
            h = hash((h, w.tobytes(), b.tobytes()))
        return h


class GradientSet:
    """dLoss/dtheta, shape-congruent with its NetworkParams."""

    def __init__(self, weights, biases):
        self.weights = list(weights)
        self.biases = list(biases)

    @classmethod
    def zeros_like(cls, params: NetworkParams) -> "GradientSet":
        return cls(
            [np.zeros_like(w) for w in params.weights],
            [np.zeros_like(b) for b in params.biases],
        )

    def add(self, other: "GradientSet") -> "GradientSet":
        for w, ow in zip(self.weights, other.weights, strict=True):
            w += ow
        for b, ob in zip(self.biases, other.biases, strict=True):
            b += ob
        return self

    def scale(self, factor: float) -> "GradientSet":
        for w in self.weights:
            w *= factor
        for b in self.biases:
            b *= factor
        return self


def init_params(specs: list[LayerSpec] | tuple[LayerSpec, ...], rng: np.random.Generator) -> NetworkParams:
    """Uniform fan-in scaled weights in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases."""
    weights, biases = [], []
    for spec in specs:
        bound = 1.0 / np.sqrt(spec.input_dim)
        weights.append(rng.uniform(-bound, bound, size=(spec.output_dim, spec.input_dim)))
        biases.append(np.zeros(spec.output_dim))
    return NetworkParams(tuple(specs), weights, biases)


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(params: NetworkParams, x: np.ndarray) -> list[np.ndarray]:
    """All per-layer activations, activations[0] being the input.

    Accepts a single vector (D,) or a batch (N, D); the returned activations
    match the input's dimensionality.
    """
    a = np.asarray(x, dtype=np.float64)
    if a.shape[-1] != params.input_dim:
        raise DimensionMismatchError(
            f"input dim {a.shape[-1]} != network input dim {params.input_dim}"
        )
    activations = [a]
    for spec, w, b in zip(params.specs, params.weights, params.biases):
        z = a @ w.T + b
        if spec.activation == "tanh":
            a = np.tanh(z)
        elif spec.activation == "linear":
            a = z
        elif spec.activation == "softmax":
            a = _softmax(z)
        else:
            a = _sigmoid(z)
        activations.append(a)
    return activations


def backward(
    params: NetworkParams,
    activations: list[np.ndarray],
    loss_grad_at_output: np.ndarray,
    with_input_grad: bool = False,
):
    """Chain rule back through the stack.

    `loss_grad_at_output` is dLoss/d(final activation). Returns a GradientSet
    (batch-summed); with `with_input_grad` also returns dLoss/d(input), which
    lets callers compose stacks (shared trunk + task heads).
    """
    g = np.asarray(loss_grad_at_output, dtype=np.float64)
    if g.shape != activations[-1].shape:
        raise DimensionMismatchError(
            f"output gradient shape {g.shape} != activation shape {activations[-1].shape}"
        )
    single = g.ndim == 1
    if single:
        g = g[None, :]
    d_weights = [None] * len(params.specs)
    d_biases = [None] * len(params.specs)
    for layer in range(len(params.specs) - 1, -1, -1):
        a = activations[layer + 1]
        if single:
            a = a[None, :]
        act = params.specs[layer].activation
        if act == "tanh":
            dz = g * (1.0 - a * a)
        elif act == "sigmoid":
            dz = g * a * (1.0 - a)
        elif act == "softmax":
            dz = a * (g - (g * a).sum(axis=-1, keepdims=True))
        else:
            dz = g
        a_prev = activations[layer]
        if single:
            a_prev = a_prev[None, :]
        d_weights[layer] = dz.T @ a_prev
        d_biases[layer] = dz.sum(axis=0)
        g = dz @ params.weights[layer]
    grads = GradientSet(d_weights, d_biases)
    if with_input_grad:
        return grads, (g[0] if single else g)
    return grads


def sgd_step(params: NetworkParams, grads: GradientSet, learning_rate: float) -> NetworkParams:
    """theta <- theta - lr * g, in place. Rejects non-finite gradients."""
    if learning_rate <= 0:
        raise ValueError("learning rate must be positive")
    for g in grads.weights + grads.biases:
        if not np.all(np.isfinite(g)):
            raise TrainingError("non-finite gradient; update aborted")
    for w, gw in zip(params.weights, grads.weights, strict=True):
        w -= learning_rate * gw
    for b, gb in zip(params.biases, grads.biases, strict=True):
        b -= learning_rate * gb
    return params


def copy_params(src: NetworkParams) -> NetworkParams:
    return NetworkParams(
        src.specs, [w.copy() for w in src.weights], [b.copy() for b in src.biases]
    )


def params_equal(a: NetworkParams, b: NetworkParams) -> bool:
    return (
        a.specs == b.specs
        and all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights))
        and all(np.array_equal(x, y) for x, y in zip(a.biases, b.biases))
    )


# Loss helpers: (mean loss over the batch, dLoss/d(final activation)) pairs.
# The returned gradient already carries the 1/N minibatch-mean factor.


def mse_loss_grad(pred: np.ndarray, target: np.ndarray):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    n = pred.shape[0] if pred.ndim > 0 else 1
    diff = pred - target
    loss = float(np.mean(diff**2))
    return loss, 2.0 * diff / n


def cross_entropy_loss_grad(probs: np.ndarray, labels: np.ndarray):
    """probs (N, C) from a softmax head, integer labels (N,)."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = probs.shape[0]
    picked = np.clip(probs[np.arange(n), labels], _EPS, None)
    loss = float(-np.mean(np.log(picked)))
    grad = np.zeros_like(probs)
    grad[np.arange(n), labels] = -1.0 / (picked * n)
    return loss, grad


def binary_cross_entropy_loss_grad(probs: np.ndarray, targets: np.ndarray):
    """probs (N,) from a sigmoid head, binary targets (N,)."""
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    n = probs.shape[0]
    p = np.clip(probs, _EPS, 1.0 - _EPS)
    loss = float(-np.mean(targets * np.log(p) + (1.0 - targets) * np.log(1.0 - p)))
    grad = (p - targets) / (p * (1.0 - p) * n)
    return loss, grad


def save_checkpoint(path, networks: dict[str, NetworkParams]) -> None:
    """Serialize named parameter stacks into one npz with a JSON shape header."""
    meta = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "networks": {
            name: [
                {"input_dim": s.input_dim, "output_dim": s.output_dim, "activation": s.activation}
                for s in p.specs
            ]
            for name, p in networks.items()
        },
    }
    arrays = {"__meta__": np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)}
    for name, p in networks.items():
        for i, (w, b) in enumerate(zip(p.weights, p.biases)):
            arrays[f"{name}/w{i}"] = w
            arrays[f"{name}/b{i}"] = b
    np.savez_compressed(path, **arrays)


def load_checkpoint(path) -> dict[str, NetworkParams]:
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
        if meta.get("format_version") != CHECKPOINT_FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('format_version')}")
        networks = {}
        for name, layer_meta in meta["networks"].items():
            specs = tuple(
                LayerSpec(m["input_dim"], m["output_dim"], m["activation"]) for m in layer_meta
            )
            weights = [data[f"{name}/w{i}"] for i in range(len(specs))]
            biases = [data[f"{name}/b{i}"] for i in range(len(specs))]
            # NetworkParams' constructor rejects header/array shape mismatches
            networks[name] = NetworkParams(specs, weights, biases)
    return networks
