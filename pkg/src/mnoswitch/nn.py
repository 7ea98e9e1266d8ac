"""A small fully connected Q-network in numpy, trained with plain SGD."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ACTIVATIONS = ("relu", "tanh")


def _act(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _act_grad(name, z, a):
    if name == "relu":
        return (z > 0).astype(z.dtype)
    return 1.0 - a * a


@dataclass
class Network:
    weights: list  # weights[k] has shape (fan_out, fan_in)
    biases: list
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias vector per weight matrix")
        self.weights = [np.array(w, dtype=float) for w in self.weights]
        self.biases = [np.array(b, dtype=float) for b in self.biases]
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"layer {k}: weight {w.shape} and bias {b.shape} do not match")
            if k and w.shape[1] != self.weights[k - 1].shape[0]:
                raise ValueError(f"layer {k}: fan-in {w.shape[1]} != previous fan-out {self.weights[k - 1].shape[0]}")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def sizes(self) -> list[int]:
        return [self.input_dim] + [w.shape[0] for w in self.weights]

    def params(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def copy(self) -> "Network":
        return Network([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.activation)

    def __call__(self, x):
        return forward(self, x)


@dataclass
class Gradient:
    weights: list
    biases: list
    loss: float = field(default=0.0)

    def params(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])


def init_network(sizes, rng: np.random.Generator, activation: str = "relu") -> Network:
    """Glorot-uniform weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Network(weights, biases, activation)


def _check_input(net: Network, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = x[None, :] if single else x
    if x2.ndim != 2 or x2.shape[1] != net.input_dim:
        raise ValueError(f"expected features of dimension {net.input_dim}, got shape {x.shape}")
    return x2, single


def _forward_cache(net: Network, x2: np.ndarray):
    zs, acts = [], [x2]
    a = x2
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        a = z if k == last else _act(net.activation, z)
        zs.append(z)
        acts.append(a)
    return zs, acts


def forward(net: Network, x) -> np.ndarray:
    """Q-values for one feature vector ``(d,)`` or a batch ``(B, d)``."""
    x2, single = _check_input(net, x)
    out = _forward_cache(net, x2)[1][-1]
    return out[0] if single else out


def backward(net: Network, x, actions, targets) -> Gradient:
    """Gradient of ``0.5 * mean_i (Q(x_i)[a_i] - y_i)**2``.

    Only the selected output of each sample carries an error signal.
    """
    x2, single = _check_input(net, x)
    actions = np.atleast_1d(np.asarray(actions, dtype=np.int64))
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    B = x2.shape[0]
    if actions.shape != (B,) or targets.shape != (B,):
        raise ValueError(f"need one action and one target per sample ({B}), got {actions.shape}, {targets.shape}")
    if np.any(actions < 0) or np.any(actions >= net.output_dim):
        raise ValueError("action index outside the network's output range")
    zs, acts = _forward_cache(net, x2)
    q = acts[-1]
    err = q[np.arange(B), actions] - targets
    delta = np.zeros_like(q)
    delta[np.arange(B), actions] = err / B
    gw = [None] * len(net.weights)
    gb = [None] * len(net.weights)
    for k in range(len(net.weights) - 1, -1, -1):
        gw[k] = delta.T @ acts[k]
        gb[k] = delta.sum(axis=0)
        if k:
            delta = (delta @ net.weights[k]) * _act_grad(net.activation, zs[k - 1], acts[k])
    return Gradient(gw, gb, loss=float(0.5 * np.mean(err * err)))


def loss(net: Network, x, actions, targets) -> float:
    q = forward(net, np.atleast_2d(x))
    actions = np.atleast_1d(actions)
    err = q[np.arange(q.shape[0]), actions] - np.atleast_1d(targets)
    return float(0.5 * np.mean(err * err))


def sgd_step(net: Network, grad: Gradient, lr: float) -> Network:
    """In-place update ``theta <- theta - lr * grad``; returns ``net``."""
    if not lr > 0:
        raise ValueError(f"learning rate must be > 0, got {lr}")
    for p, g in zip(net.params(), grad.params()):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")
    for p, g in zip(net.params(), grad.params()):
        p -= lr * g
    for p in net.params():
        if not np.all(np.isfinite(p)):
            raise FloatingPointError("network parameters became non-finite")
    return net


def sync(target: Network, primary: Network) -> Network:
    """Copy the primary parameters into ``target`` (in place)."""
    if target.sizes != primary.sizes:
        raise ValueError(f"cannot sync networks of shapes {target.sizes} and {primary.sizes}")
    for dst, src in zip(target.params(), primary.params()):
        dst[...] = src
    target.activation = primary.activation
    return target


def save_checkpoint(net: Network, path):
    doc = {
        "format": "mnoswitch-mlp/1",
        "sizes": net.sizes,
        "activation": net.activation,
        # float repr is shortest round-trip, so json reload is bit-exact
        "params": [float(v) for v in net.flat()],
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def load_checkpoint(path) -> Network:
    doc = json.loads(Path(path).read_text())
    sizes = doc["sizes"]
    flat = np.array(doc["params"], dtype=float)
    weights, biases, i = [], [], 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(flat[i:i + fan_in * fan_out].reshape(fan_out, fan_in))
        i += fan_in * fan_out
        biases.append(flat[i:i + fan_out])
        i += fan_out
    if i != flat.size:
        raise ValueError(f"{path}: {flat.size} parameters do not match architecture {sizes}")
    return Network(weights, biases, doc.get("activation", "relu"))
