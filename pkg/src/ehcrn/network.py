"""Minimal dense Q-value approximator.

Explicit forward pass, backpropagation and plain stochastic gradient
descent, double precision throughout -- no autodiff framework. Hidden
layers share one nonlinearity; the output layer is linear and has one
entry per action.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .streams import RandomStream


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z):
    return (z > 0.0).astype(np.float64)


def _tanh(z):
    return np.tanh(z)


def _tanh_grad(z):
    return 1.0 - np.tanh(z) ** 2


ACTIVATIONS = {"relu": (_relu, _relu_grad), "tanh": (_tanh, _tanh_grad)}


@dataclass
class QNetwork:
    """Fully-connected network parameters: one weight matrix
    ``(fan_in, fan_out)`` and bias vector per layer."""

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "relu"

    @property
    def input_size(self) -> int:
        return self.layer_dims[0]

    @property
    def output_size(self) -> int:
        return self.layer_dims[-1]


@dataclass
class GradientSet:
    """Loss gradients, shape-congruent with a :class:`QNetwork`."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]


class TransitionBatch(NamedTuple):
    """A sampled replay batch, arrays over the leading batch dimension.
    ``terminals`` marks transitions whose Bellman target drops the
    bootstrap term."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray


def init_network(layer_dims, stream: RandomStream, activation: str = "relu") -> QNetwork:
    """Create a network with weights uniform in ``+-1/sqrt(fan_in)`` and
    zero biases, drawn from ``stream``."""
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError(f"layer_dims needs >= 2 positive entries, got {dims}")
    if activation not in ACTIVATIONS:
        raise ValueError(
            f"unknown activation {activation!r}; choose from {sorted(ACTIVATIONS)}"
        )
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(stream.generator.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return QNetwork(dims, weights, biases, activation)


def forward(net: QNetwork, state) -> np.ndarray:
    """Action values for one state (1-D input) or a batch (2-D input)."""
    x = np.asarray(state, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[np.newaxis, :]
    if x.ndim != 2 or x.shape[1] != net.input_size:
        raise ValueError(
            f"state has shape {np.shape(state)}, expected (..., {net.input_size})"
        )
    act, _ = ACTIVATIONS[net.activation]
    last = len(net.weights) - 1
    h = x
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w + b
        if i < last:
            h = act(h)
    return h[0] if single else h


def _forward_cached(net: QNetwork, x: np.ndarray):
    """Forward pass keeping each layer's input and pre-activation."""
    act, _ = ACTIVATIONS[net.activation]
    last = len(net.weights) - 1
    inputs = [x]
    preacts = []
    h = x
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        preacts.append(z)
        if i < last:
            h = act(z)
            inputs.append(h)
        else:
            h = z
    return h, inputs, preacts


def td_loss(
    net: QNetwork, target_net: QNetwork, batch: TransitionBatch, gamma: float
) -> tuple[float, GradientSet]:
    """Mean squared temporal-difference error over a batch, with its
    gradients for the online network.

    The target ``r + gamma * max_a' Q_target(s', a')`` is treated as a
    constant during differentiation, and its bootstrap term is zeroed for
    terminal transitions.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    states = np.asarray(batch.states, dtype=np.float64)
    if states.ndim != 2 or states.shape[0] == 0:
        raise ValueError("batch must contain at least one transition")
    actions = np.asarray(batch.actions, dtype=np.intp)
    rewards = np.asarray(batch.rewards, dtype=np.float64)
    next_states = np.asarray(batch.next_states, dtype=np.float64)
    continues = 1.0 - np.asarray(batch.terminals, dtype=np.float64)

    q_next = forward(target_net, next_states)
    targets = rewards + gamma * q_next.max(axis=1) * continues

    q_all, inputs, preacts = _forward_cached(net, states)
    n = states.shape[0]
    rows = np.arange(n)
    errors = q_all[rows, actions] - targets
    loss = float(np.mean(errors**2))

    # Backpropagate d(loss)/d(output): nonzero only at the taken actions.
    delta = np.zeros_like(q_all)
    delta[rows, actions] = 2.0 * errors / n
    _, act_grad = ACTIVATIONS[net.activation]
    grad_w: list[np.ndarray] = [None] * len(net.weights)  # type: ignore[list-item]
    grad_b: list[np.ndarray] = [None] * len(net.biases)  # type: ignore[list-item]
    for layer in reversed(range(len(net.weights))):
        grad_w[layer] = inputs[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ net.weights[layer].T) * act_grad(preacts[layer - 1])
    return loss, GradientSet(grad_w, grad_b)


def sgd_step(net: QNetwork, grads: GradientSet, learning_rate: float) -> QNetwork:
    """Plain gradient descent: every parameter moves against its gradient,
    scaled by the learning rate. Updates in place and returns the net."""
    if not 0.0 < learning_rate < 1.0:
        raise ValueError(f"learning_rate must lie in (0, 1), got {learning_rate}")
    if len(grads.weights) != len(net.weights) or len(grads.biases) != len(net.biases):
        raise ValueError("gradient layer count does not match the network")
    for w, gw in zip(net.weights, grads.weights):
        if w.shape != gw.shape:
            raise ValueError(f"weight gradient shape {gw.shape} != parameter {w.shape}")
        w -= learning_rate * gw
    for b, gb in zip(net.biases, grads.biases):
        if b.shape != gb.shape:
            raise ValueError(f"bias gradient shape {gb.shape} != parameter {b.shape}")
        b -= learning_rate * gb
    return net


def clone_parameters(net: QNetwork) -> QNetwork:
    """Deep copy: later updates to either network leave the other
    unchanged."""
    return QNetwork(
        net.layer_dims,
        [w.copy() for w in net.weights],
        [b.copy() for b in net.biases],
        net.activation,
    )


CHECKPOINT_VERSION = 1


def save_checkpoint(net: QNetwork, path) -> None:
    """Write a self-describing parameter file: format version, layer dims,
    activation tag, and per-layer row-major little-endian float64 arrays.
    Round trips are bit-exact."""
    arrays = {
        "format_version": np.array([CHECKPOINT_VERSION], dtype="<i8"),
        "layer_dims": np.array(net.layer_dims, dtype="<i8"),
        "activation": np.array(net.activation),
    }
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        arrays[f"weights_{i}"] = np.ascontiguousarray(w, dtype="<f8")
        arrays[f"biases_{i}"] = np.ascontiguousarray(b, dtype="<f8")
    np.savez(path, **arrays)


def load_checkpoint(path) -> QNetwork:
    """Load a checkpoint written by :func:`save_checkpoint`."""
    with np.load(path, allow_pickle=False) as data:
        version = int(data["format_version"][0])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        dims = tuple(int(d) for d in data["layer_dims"])
        activation = str(data["activation"])
        weights = [
            data[f"weights_{i}"].astype(np.float64) for i in range(len(dims) - 1)
        ]
        biases = [data[f"biases_{i}"].astype(np.float64) for i in range(len(dims) - 1)]
    return QNetwork(dims, weights, biases, activation)
