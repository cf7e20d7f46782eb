"""Minimal feedforward nets with exact manual gradients.

Small affine+activation stacks for the encoder, decoder, and frozen task
function in the general (nonlinear) setting. Forward passes record a tape
of layer inputs and pre-activations; the backward pass replays it for
exact reverse-mode gradients, checked against finite differences in the
test suite. No external autodiff framework.

Inputs may be single vectors ``(n,)`` or row batches ``(N, n)``; batch
gradients are summed over rows, so a mean-type loss should carry its 1/N
inside the upstream gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadTarget, DimensionMismatch, DivergenceError, TapeMismatch

ACTIVATIONS = ("identity", "relu", "logistic")


@dataclass
class Layer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise DimensionMismatch("layer weight/bias shapes disagree")


@dataclass
class Net:
    layers: list[Layer]

    def __post_init__(self):
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.weights.shape[1] != prev.weights.shape[0]:
                raise DimensionMismatch("consecutive layer dimensions do not chain")

    @property
    def in_dim(self) -> int:
        return self.layers[0].weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weights.shape[0]


@dataclass
class Tape:
    """Forward-pass record consumed by :func:`backward`."""

    net_id: int
    inputs: list = field(default_factory=list)  # layer inputs, 2-D
    preacts: list = field(default_factory=list)  # pre-activations, 2-D
    squeeze: bool = False  # original input was a single vector


def make_net(dims, activations, seed: int = 0) -> Net:
    """Build a net with the given layer widths and activation tags.

    ``dims`` is ``[in, hidden..., out]``; ``activations`` has one tag per
    layer. Weights start uniform in +-sqrt(6/(fan_in+fan_out)), biases at
    zero.
    """
    if len(activations) != len(dims) - 1:
        raise DimensionMismatch("need one activation per layer")
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out, act in zip(dims, dims[1:], activations):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        layers.append(
            Layer(
                weights=rng.uniform(-bound, bound, size=(fan_out, fan_in)),
                bias=np.zeros(fan_out),
                activation=act,
            )
        )
    return Net(layers)


def identity_net(dim: int) -> Net:
    """Single identity layer; used by the raw-data benchmark encoder."""
    return Net([Layer(weights=np.eye(dim), bias=np.zeros(dim), activation="identity")])


def clone_net(net: Net) -> Net:
    return Net(
        [
            Layer(l.weights.copy(), l.bias.copy(), l.activation)
            for l in net.layers
        ]
    )


def parameters(net: Net) -> list[np.ndarray]:
    """Flat parameter list (weights and biases interleaved, by layer)."""
    out = []
    for layer in net.layers:
        out.append(layer.weights)
        out.append(layer.bias)
    return out


def param_norm_sq(net: Net) -> float:
    return float(sum(np.sum(p**2) for p in parameters(net)))


def _activate(tag: str, z: np.ndarray) -> np.ndarray:
    if tag == "identity":
        return z
    if tag == "relu":
        return np.maximum(z, 0.0)
    # numerically stable logistic
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activation_grad(tag: str, z: np.ndarray) -> np.ndarray:
    if tag == "identity":
        return np.ones_like(z)
    if tag == "relu":
        return (z > 0).astype(float)  # subgradient at 0 is 0
    a = _activate("logistic", z)
    return a * (1.0 - a)


def forward(net: Net, x) -> tuple[np.ndarray, Tape]:
    """Evaluate the net; returns the output and the tape for backward."""
    arr = np.asarray(x, dtype=float)
    squeeze = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != net.in_dim:
        raise DimensionMismatch(f"input width {arr.shape[1]}, net expects {net.in_dim}")
    tape = Tape(net_id=id(net), squeeze=squeeze)
    current = arr
    for layer in net.layers:
        tape.inputs.append(current)
        z = current @ layer.weights.T + layer.bias
        tape.preacts.append(z)
        current = _activate(layer.activation, z)
    return (current[0] if squeeze else current), tape


def backward(net: Net, tape: Tape, upstream):
    """Exact reverse-mode gradients.

    Returns ``(param_grads, input_grad)`` where ``param_grads`` is a list
    of ``(dW, db)`` per layer (summed over batch rows) and ``input_grad``
    matches the shape of the forward input.
    """
    if tape.net_id != id(net) or len(tape.preacts) != len(net.layers):
        raise TapeMismatch("tape does not belong to this net")
    g = np.atleast_2d(np.asarray(upstream, dtype=float))
    if g.shape[1] != net.out_dim or g.shape[0] != tape.preacts[-1].shape[0]:
        raise DimensionMismatch("upstream gradient shape mismatch")
    param_grads: list = [None] * len(net.layers)
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        g = g * _activation_grad(layer.activation, tape.preacts[i])
        param_grads[i] = (g.T @ tape.inputs[i], g.sum(axis=0))
        g = g @ layer.weights
    return param_grads, (g[0] if tape.squeeze else g)


def task_loss(task_net: Net, loss: str, x_hat, x):
    """Loss between task outputs on the estimate and on the truth.

    ``value = l(f(x_hat), f(x))`` averaged over batch rows; the returned
    gradient is with respect to ``x_hat`` (the task net stays frozen).
    Supported losses: ``squared_l2`` and ``binary_cross_entropy`` (the
    latter expects task outputs in [0, 1], i.e. a logistic head).
    """
    y_true, _ = forward(task_net, x)
    y_hat, tape = forward(task_net, x_hat)
    y_true2 = np.atleast_2d(y_true)
    y_hat2 = np.atleast_2d(y_hat)
    batch = y_hat2.shape[0]
    if loss == "squared_l2":
        diff = y_hat2 - y_true2
        value = float(np.sum(diff**2) / batch)
        upstream = 2.0 * diff / batch
    elif loss == "binary_cross_entropy":
        if np.any(y_true2 < 0.0) or np.any(y_true2 > 1.0):
            raise BadTarget("cross-entropy targets must lie in [0, 1]")
        clipped = np.clip(y_hat2, 1e-12, 1.0 - 1e-12)
        value = float(
            -np.sum(y_true2 * np.log(clipped) + (1 - y_true2) * np.log(1 - clipped))
            / batch
        )
        upstream = (-(y_true2 / clipped) + (1 - y_true2) / (1 - clipped)) / batch
    else:
        raise ValueError(f"unknown loss {loss!r}")
    _, grad_x_hat = backward(task_net, tape, upstream)
    return value, grad_x_hat


class Adam:
    """Adaptive-moment gradient stepper (beta 0.9/0.999, eps 1e-8)."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m: list = []
        self._v: list = []
        self._t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if not self._m:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self._t += 1
        correct1 = 1.0 - self.beta1**self._t
        correct2 = 1.0 - self.beta2**self._t
        for p, g, m, v in zip(params, grads, self._m, self._v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g**2
            p -= self.lr * (m / correct1) / (np.sqrt(v / correct2) + self.eps)


def pretrain_task(data, targets, hidden_dims=(), epochs: int = 200,
                  loss: str = "squared_l2", lr: float = 1e-3, seed: int = 0):
    """Fit a task net to (sample, target) pairs by full-batch Adam.

    The head activation follows the loss: identity for squared_l2,
    logistic for binary_cross_entropy; hidden layers use relu. Returns the
    trained net and its final training loss. The caller treats the result
    as frozen from here on.
    """
    x = np.atleast_2d(np.asarray(data, dtype=float))
    y = np.asarray(targets, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape[0] != x.shape[0]:
        raise DimensionMismatch("targets length must match sample count")
    head = "logistic" if loss == "binary_cross_entropy" else "identity"
    dims = [x.shape[1], *hidden_dims, y.shape[1]]
    activations = ["relu"] * len(hidden_dims) + [head]
    net = make_net(dims, activations, seed=seed)

    def training_loss_and_grads():
        out, tape = forward(net, x)
        batch = x.shape[0]
        if loss == "squared_l2":
            diff = out - y
            value = float(np.sum(diff**2) / batch)
            upstream = 2.0 * diff / batch
        else:
            if np.any((y != 0.0) & (y != 1.0)):
                raise BadTarget("binary targets must be 0 or 1")
            clipped = np.clip(out, 1e-12, 1.0 - 1e-12)
            value = float(
                -np.sum(y * np.log(clipped) + (1 - y) * np.log(1 - clipped)) / batch
            )
            upstream = (-(y / clipped) + (1 - y) / (1 - clipped)) / batch
        grads, _ = backward(net, tape, upstream)
        return value, [g for pair in grads for g in pair]

    opt = Adam(lr=lr)
    for _ in range(epochs):
        value, flat_grads = training_loss_and_grads()
        if not np.isfinite(value):
            raise DivergenceError(f"training loss became non-finite ({value})")
        opt.step(parameters(net), flat_grads)
    final_value, _ = training_loss_and_grads()
    return net, final_value


def net_to_text(net: Net) -> str:
    """Versioned text serialization, exact float round-trip."""
    lines = [f"taskldp-net v1", f"layers {len(net.layers)}"]
    for layer in net.layers:
        out_dim, in_dim = layer.weights.shape
        lines.append(f"layer {out_dim} {in_dim} {layer.activation}")
        for row in layer.weights:
            lines.append(" ".join(f"{x:.17g}" for x in row))
        lines.append(" ".join(f"{x:.17g}" for x in layer.bias))
    return "\n".join(lines) + "\n"


def net_from_text(text: str) -> Net:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "taskldp-net v1":
        raise ValueError("not a v1 net file")
    count = int(lines[1].split()[1])
    pos = 2
    layers = []
    for _ in range(count):
        _, out_s, in_s, act = lines[pos].split()
        out_dim, in_dim = int(out_s), int(in_s)
        pos += 1
        weights = np.array(
            [[float(t) for t in lines[pos + r].split()] for r in range(out_dim)]
        )
        pos += out_dim
        bias = np.array([float(t) for t in lines[pos].split()])
        pos += 1
        layers.append(Layer(weights=weights, bias=bias, activation=act))
    return Net(layers)
