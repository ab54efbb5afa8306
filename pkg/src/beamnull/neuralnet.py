"""Minimal dense-network substrate: layers, reverse-mode gradients, Adam.

Everything is float64 numpy.  The networks here are tiny (two hidden layers),
so clarity and exact reproducibility win over speed.
"""

from __future__ import annotations

import json

import numpy as np


class Dense:
    """Affine layer y = x @ W + b with uniform fan-in init (+-sqrt(1/fan_in))."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        limit = np.sqrt(1.0 / n_in)
        self.w = rng.uniform(-limit, limit, size=(n_in, n_out))
        self.b = np.zeros(n_out)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None

    def forward(self, x, training: bool):
        if training:
            self._x = x
        return x @ self.w + self.b

    def backward(self, dy):
        if self._x is None:
            raise RuntimeError("backward called without a training-mode forward")
        self.dw[...] = self._x.T @ dy
        self.db[...] = dy.sum(axis=0)
        return dy @ self.w.T

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.dw, self.db]


class BatchNorm:
    """Batch normalization over axis 0 with running statistics for inference."""

    def __init__(self, n: int, momentum: float = 0.9, eps: float = 1e-5):
        self.gamma = np.ones(n)
        self.beta = np.zeros(n)
        self.dgamma = np.zeros(n)
        self.dbeta = np.zeros(n)
        self.running_mean = np.zeros(n)
        self.running_var = np.ones(n)
        self.momentum = momentum
        self.eps = eps
        self._xhat = None
        self._ivar = None

    def forward(self, x, training: bool):
        if training:
            if x.shape[0] < 2:
                raise ValueError("batch norm in training mode needs batch size >= 2")
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            self.running_mean = self.momentum * self.running_mean + (1 - self.momentum) * mean
            self.running_var = self.momentum * self.running_var + (1 - self.momentum) * var
            ivar = 1.0 / np.sqrt(var + self.eps)
            xhat = (x - mean) * ivar
            self._xhat, self._ivar = xhat, ivar
        else:
            xhat = (x - self.running_mean) / np.sqrt(self.running_var + self.eps)
        return self.gamma * xhat + self.beta

    def backward(self, dy):
        if self._xhat is None:
            raise RuntimeError("backward called without a training-mode forward")
        xhat, ivar = self._xhat, self._ivar
        n = dy.shape[0]
        self.dgamma[...] = (dy * xhat).sum(axis=0)
        self.dbeta[...] = dy.sum(axis=0)
        dxhat = dy * self.gamma
        return ivar / n * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))

    def params(self):
        return [self.gamma, self.beta]

    def grads(self):
        return [self.dgamma, self.dbeta]

    def extra_state(self):
        return [self.running_mean, self.running_var]


class ReLU:
    def __init__(self):
        self._mask = None

    def forward(self, x, training: bool):
        if training:
            self._mask = x > 0
        return np.maximum(x, 0.0)

    def backward(self, dy):
        return dy * self._mask

    def params(self):
        return []

    def grads(self):
        return []


class Tanh:
    """tanh scaled by `scale`; scale=pi maps the output into (-pi, pi)."""

    def __init__(self, scale: float = 1.0):
        self.scale = scale
        self._t = None

    def forward(self, x, training: bool):
        t = np.tanh(x)
        if training:
            self._t = t
        return self.scale * t

    def backward(self, dy):
        return dy * self.scale * (1.0 - self._t ** 2)

    def params(self):
        return []

    def grads(self):
        return []


_LAYER_TAGS = {"Dense": Dense, "BatchNorm": BatchNorm, "ReLU": ReLU, "Tanh": Tanh}

CHECKPOINT_VERSION = 1


class DenseNet:
    """An ordered stack of layers with a training/inference mode switch."""

    def __init__(self, layers, training: bool = True):
        self.layers = list(layers)
        self.training = training

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        for layer in self.layers:
            x = layer.forward(x, self.training)
        return x[0] if squeeze else x

    def backward(self, dy):
        """Propagate an output gradient; returns the input gradient.

        Parameter gradients are left on the layers (see `grads`).
        """
        dy = np.asarray(dy, dtype=float)
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def grads(self):
        return [g for layer in self.layers for g in layer.grads()]

    def train(self):
        self.training = True
        return self

    def eval(self):
        self.training = False
        return self

    def _all_state(self):
        state = self.params()
        for layer in self.layers:
            if isinstance(layer, BatchNorm):
                state.extend(layer.extra_state())
        return state

    def copy_weights_from(self, other: "DenseNet", rate: float = 1.0) -> None:
        """Soft update: state <- rate*other + (1-rate)*state (includes BN stats)."""
        for dst, src in zip(self._all_state(), other._all_state()):
            dst *= 1.0 - rate
            dst += rate * src

    def clone(self) -> "DenseNet":
        net = DenseNet.from_state(self.to_state())
        net.training = self.training
        return net

    def to_state(self) -> dict:
        """Checkpoint dict: layer kinds, shapes, and row-major parameter arrays."""
        layers = []
        for layer in self.layers:
            entry = {"kind": type(layer).__name__}
            if isinstance(layer, Dense):
                entry["w"] = layer.w.tolist()
                entry["b"] = layer.b.tolist()
            elif isinstance(layer, BatchNorm):
                entry.update(
                    gamma=layer.gamma.tolist(),
                    beta=layer.beta.tolist(),
                    running_mean=layer.running_mean.tolist(),
                    running_var=layer.running_var.tolist(),
                    momentum=layer.momentum,
                    eps=layer.eps,
                )
            elif isinstance(layer, Tanh):
                entry["scale"] = layer.scale
            layers.append(entry)
        return {"checkpoint_version": CHECKPOINT_VERSION, "layers": layers}

    @classmethod
    def from_state(cls, state: dict) -> "DenseNet":
        if state.get("checkpoint_version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version: {state.get('checkpoint_version')!r}")
        layers = []
        for entry in state["layers"]:
            kind = entry["kind"]
            if kind == "Dense":
                w = np.asarray(entry["w"], dtype=float)
                layer = Dense(w.shape[0], w.shape[1], np.random.default_rng(0))
                layer.w = w
                layer.b = np.asarray(entry["b"], dtype=float)
                layer.dw = np.zeros_like(layer.w)
                layer.db = np.zeros_like(layer.b)
            elif kind == "BatchNorm":
                gamma = np.asarray(entry["gamma"], dtype=float)
                layer = BatchNorm(gamma.size, momentum=entry["momentum"], eps=entry["eps"])
                layer.gamma = gamma
                layer.beta = np.asarray(entry["beta"], dtype=float)
                layer.running_mean = np.asarray(entry["running_mean"], dtype=float)
                layer.running_var = np.asarray(entry["running_var"], dtype=float)
            elif kind == "ReLU":
                layer = ReLU()
            elif kind == "Tanh":
                layer = Tanh(scale=entry["scale"])
            else:
                raise ValueError(f"unknown layer kind: {kind!r}")
            layers.append(layer)
        return cls(layers)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_state(), fh)

    @classmethod
    def load(cls, path) -> "DenseNet":
        with open(path) as fh:
            return cls.from_state(json.load(fh))


def mlp(
    sizes,
    rng: np.random.Generator,
    batch_norm: bool = True,
    output_tanh_scale: float | None = None,
) -> DenseNet:
    """Feed-forward net: each hidden layer is dense -> batch norm -> ReLU.

    The output layer is linear, or tanh scaled by `output_tanh_scale`.
    """
    layers = []
    for i in range(len(sizes) - 2):
        layers.append(Dense(sizes[i], sizes[i + 1], rng))
        if batch_norm:
            layers.append(BatchNorm(sizes[i + 1]))
        layers.append(ReLU())
    layers.append(Dense(sizes[-2], sizes[-1], rng))
    if output_tanh_scale is not None:
        layers.append(Tanh(scale=output_tanh_scale))
    return DenseNet(layers)


def mse_loss(pred, target):
    """Mean squared error and its gradient w.r.t. pred."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    diff = pred - target
    return float(np.mean(diff ** 2)), 2.0 * diff / diff.size


def stepwise_lr(base_lr: float, count: int, boundaries, factor: float = 0.1) -> float:
    """Learning rate after `count` completed units, decayed at each boundary.

    With boundaries=[100, 300, 400] the rate is multiplied by `factor` once
    the unit counter exceeds each listed value.
    """
    drops = sum(1 for b in boundaries if count > b)
    return base_lr * factor ** drops


class Adam:
    """Adam with bias correction and an optional stepwise LR schedule.

    If `boundaries` is given the schedule is keyed on the optimizer's own step
    counter; callers that schedule by epoch instead set `.lr` directly.
    """

    def __init__(
        self,
        params,
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        boundaries=(),
        factor: float = 0.1,
    ):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.boundaries = tuple(boundaries)
        self.factor = factor
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads) -> None:
        """One in-place update of `params` given matching `grads`."""
        if len(params) != len(self.m):
            raise ValueError("parameter count changed since optimizer construction")
        self.t += 1
        lr = stepwise_lr(self.lr, self.t, self.boundaries, self.factor)
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if p.shape != g.shape:
                raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g ** 2
            p -= lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
