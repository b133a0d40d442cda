"""Multilayer perceptron Q(s, a; theta) with hand-written backpropagation.

Hidden layers are affine + ReLU, the output layer is affine. All
arithmetic is float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ._rng import SplitMix64
from .errors import CheckpointError

QNET_HEADER = "qnet v1"


@dataclass
class GradientSet:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def scale(self, factor: float) -> "GradientSet":
        return GradientSet([w * factor for w in self.weights], [b * factor for b in self.biases])

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])


class QNetwork:
    """Parameters of an MLP. ``weights[l]`` has shape (dims[l+1], dims[l])."""

    def __init__(self, layer_dims: Sequence[int], weights: list[np.ndarray], biases: list[np.ndarray]):
        self.layer_dims = [int(d) for d in layer_dims]
        self.weights = weights
        self.biases = biases
        _check_shapes(self.layer_dims, weights, biases)

    @property
    def n_inputs(self) -> int:
        return self.layer_dims[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_dims[-1]

    def copy(self) -> "QNetwork":
        return QNetwork(self.layer_dims, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def parameters_equal(self, other: "QNetwork") -> bool:
        return self.layer_dims == other.layer_dims and all(
            np.array_equal(a, b)
            for a, b in zip(self.weights + self.biases, other.weights + other.biases)
        )

    def __call__(self, s: np.ndarray) -> np.ndarray:
        return forward(self, s)

    def __repr__(self) -> str:
        return f"QNetwork(layer_dims={self.layer_dims})"


# Frozen copies serve as target parameters; see sync_target.
TargetParams = QNetwork


def _check_shapes(dims, weights, biases):
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError(f"invalid layer dims {dims}")
    if len(weights) != len(dims) - 1 or len(biases) != len(dims) - 1:
        raise ValueError("one weight matrix and bias vector per layer required")
    for l, (w, b) in enumerate(zip(weights, biases)):
        if w.shape != (dims[l + 1], dims[l]) or b.shape != (dims[l + 1],):
            raise ValueError(f"layer {l}: bad shapes {w.shape}, {b.shape}")


def init_network(layer_dims: Sequence[int], seed: int) -> QNetwork:
    """Glorot-uniform weights from one SplitMix64 stream (row-major, layer by layer); zero biases."""
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError(f"invalid layer dims {dims}")
    gen = SplitMix64(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        w = np.fromiter(
            (gen.uniform(-bound, bound) for _ in range(fan_in * fan_out)),
            dtype=np.float64,
            count=fan_in * fan_out,
        )
        weights.append(w.reshape(fan_out, fan_in))
        biases.append(np.zeros(fan_out))
    return QNetwork(dims, weights, biases)


def _as_batch(net: QNetwork, s) -> tuple[np.ndarray, bool]:
    x = np.asarray(s, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.n_inputs:
        raise ValueError(f"state dimension {x.shape[-1]} does not match network input {net.n_inputs}")
    return x, single


def _forward_cache(net: QNetwork, x: np.ndarray) -> list[np.ndarray]:
    """Activations of every layer for a batch; the last entry is the output."""
    acts = [x]
    last = len(net.weights) - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = acts[-1] @ w.T + b
        acts.append(z if l == last else np.maximum(z, 0.0))
    return acts


def forward(net: QNetwork, s) -> np.ndarray:
    """Q-values for one state (1-D) or a batch of states (2-D)."""
    x, single = _as_batch(net, s)
    q = _forward_cache(net, x)[-1]
    return q[0] if single else q


def batch_loss_and_gradient(net: QNetwork, states, actions, targets) -> tuple[float, GradientSet]:
    """Mean over the batch of ``(target - Q(s, a))**2`` and its gradient.

    Only the output unit of the taken action receives error signal.
    """
    x, _ = _as_batch(net, states)
    a = np.asarray(actions, dtype=np.intp).reshape(-1)
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    n = x.shape[0]
    if a.shape[0] != n or y.shape[0] != n:
        raise ValueError("states, actions and targets must have the same length")
    if np.any((a < 0) | (a >= net.n_outputs)):
        raise ValueError("action out of range")
    if not np.all(np.isfinite(y)):
        raise ValueError("TD targets must be finite")
    acts = _forward_cache(net, x)
    rows = np.arange(n)
    err = y - acts[-1][rows, a]
    loss = float(np.mean(err * err))
    delta = np.zeros_like(acts[-1])
    delta[rows, a] = -2.0 * err / n
    gw: list[np.ndarray] = [None] * len(net.weights)
    gb: list[np.ndarray] = [None] * len(net.weights)
    for l in range(len(net.weights) - 1, -1, -1):
        gw[l] = delta.T @ acts[l]
        gb[l] = delta.sum(axis=0)
        if l:
            delta = (delta @ net.weights[l]) * (acts[l] > 0.0)
    return loss, GradientSet(gw, gb)


def loss_and_gradient(net: QNetwork, s, a: int, td_target: float) -> tuple[float, GradientSet]:
    x = np.asarray(s, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("loss_and_gradient takes a single state; use batch_loss_and_gradient")
    return batch_loss_and_gradient(net, x[None, :], [a], [td_target])


def apply_gradients(net: QNetwork, grads: GradientSet, learning_rate: float) -> QNetwork:
    """In-place SGD step ``theta -= learning_rate * grad``; returns ``net``."""
    if not learning_rate > 0:
        raise ValueError(f"learning_rate must be positive, got {learning_rate}")
    _check_shapes(net.layer_dims, grads.weights, grads.biases)
    for w, g in zip(net.weights, grads.weights):
        w -= learning_rate * g
    for b, g in zip(net.biases, grads.biases):
        b -= learning_rate * g
    return net


def sync_target(net: QNetwork) -> TargetParams:
    """Read-only parameter copy, isolated from later updates to ``net``."""
    target = net.copy()
    for arr in target.weights + target.biases:
        arr.flags.writeable = False
    return target


# -- checkpoints ------------------------------------------------------------------

def write_params(path, header: str, dims: Sequence[int], weights, biases) -> None:
    lines = [header, " ".join(str(d) for d in dims)]
    for w, b in zip(weights, biases):
        lines.extend(format(float(v), ".17g") for v in np.asarray(w).ravel())
        lines.extend(format(float(v), ".17g") for v in np.asarray(b).ravel())
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_params(path, header: str) -> tuple[list[int], list[np.ndarray], list[np.ndarray]]:
    try:
        lines = Path(path).read_text(encoding="ascii").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"{path}: {exc}") from exc
    if not lines or lines[0].strip() != header:
        raise CheckpointError(f"{path}: expected header {header!r}")
    try:
        dims = [int(tok) for tok in lines[1].split()]
        values = np.array([float(v) for v in lines[2:]], dtype=np.float64)
    except (IndexError, ValueError) as exc:
        raise CheckpointError(f"{path}: malformed body ({exc})") from exc
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise CheckpointError(f"{path}: invalid layer dims {dims}")
    expected = sum(o * i + o for i, o in zip(dims[:-1], dims[1:]))
    if values.size != expected:
        raise CheckpointError(f"{path}: {values.size} values, dims {dims} need {expected}")
    if not np.all(np.isfinite(values)):
        raise CheckpointError(f"{path}: non-finite parameter")
    weights, biases, pos = [], [], 0
    for i, o in zip(dims[:-1], dims[1:]):
        weights.append(values[pos:pos + i * o].reshape(o, i).copy())
        pos += i * o
        biases.append(values[pos:pos + o].copy())
        pos += o
    return dims, weights, biases


def save_checkpoint(net: QNetwork, path) -> None:
    write_params(path, QNET_HEADER, net.layer_dims, net.weights, net.biases)


def load_checkpoint(path) -> QNetwork:
    dims, weights, biases = read_params(path, QNET_HEADER)
    return QNetwork(dims, weights, biases)
