"""Fully connected regression network trained with mini-batch Adam."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch, NonFiniteLoss

log = logging.getLogger(__name__)

_ACTIVATIONS = ("logistic", "tanh", "relu", "identity")


def _act(z, kind):
    if kind == "logistic":
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    if kind == "tanh":
        return np.tanh(z)
    if kind == "relu":
        return np.maximum(z, 0.0)
    return z


def _act_grad(a, kind):
    # derivative expressed through the activation output
    if kind == "logistic":
        return a * (1.0 - a)
    if kind == "tanh":
        return 1.0 - a * a
    if kind == "relu":
        return (a > 0).astype(a.dtype)
    return np.ones_like(a)


def layer_sizes(n_inputs: int, hidden=(30, 20)) -> list:
    return [n_inputs, *hidden, 1]


def param_count(sizes) -> int:
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


def init_params(sizes, rng: np.random.Generator, activation="logistic"):
    """Glorot-uniform weights, zero biases."""
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        factor = 2.0 if activation == "logistic" else 6.0
        bound = np.sqrt(factor / (fan_in + fan_out))
        params.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return params


def forward(params, X, activation):
    acts = [X]
    a = X
    n_layers = len(params) // 2
    for k in range(n_layers):
        z = a @ params[2 * k] + params[2 * k + 1]
        a = z if k == n_layers - 1 else _act(z, activation)
        acts.append(a)
    return acts


def loss_and_grad(params, X, y, activation="logistic"):
    """Half mean squared error and its gradient for every parameter array."""
    acts = forward(params, X, activation)
    n = X.shape[0]
    out = acts[-1][:, 0]
    diff = out - y
    loss = 0.5 * float(diff @ diff) / n
    grads = [None] * len(params)
    delta = diff[:, None] / n
    n_layers = len(params) // 2
    for k in range(n_layers - 1, -1, -1):
        grads[2 * k] = acts[k].T @ delta
        grads[2 * k + 1] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ params[2 * k].T) * _act_grad(acts[k], activation)
    return loss, grads


@dataclass
class MLP:
    params: list
    activation: str
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_scale: float
    loss_curve: list = field(default_factory=list)

    @property
    def sizes(self):
        return [self.params[0].shape[0]] + [w.shape[1] for w in self.params[::2]]

    @property
    def n_params(self) -> int:
        return param_count(self.sizes)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.params[0].shape[0]:
            raise DimensionMismatch(f"expected {self.params[0].shape[0]} features, got {X.shape[1]}")
        Z = (X - self.x_mean) / self.x_scale
        return forward(self.params, Z, self.activation)[-1][:, 0] * self.y_scale + self.y_mean


def fit_mlp(X, y, *, hidden=(30, 20), activation="logistic", epochs=1000,
            learning_rate=1e-3, batch_size=128, tol=1e-4, n_iter_no_change=10,
            beta1=0.9, beta2=0.999, eps=1e-8, seed=0, standardize=True) -> MLP:
    """Train a ``D -> hidden... -> 1`` network on squared error.

    Inputs and target are standardised internally. Training runs at most
    ``epochs`` passes of shuffled mini-batches and ends early once the epoch
    loss has failed to improve on the best seen by ``tol`` for
    ``n_iter_no_change`` consecutive epochs.
    """
    if activation not in _ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"X {X.shape} incompatible with y {y.shape}")
    rng = np.random.default_rng(seed)
    n, d = X.shape
    if standardize:
        x_mean = X.mean(axis=0)
        x_scale = X.std(axis=0)
        x_scale[x_scale == 0] = 1.0
        y_mean = float(y.mean())
        y_scale = float(y.std()) or 1.0
    else:
        x_mean, x_scale, y_mean, y_scale = np.zeros(d), np.ones(d), 0.0, 1.0
    Z = (X - x_mean) / x_scale
    t = (y - y_mean) / y_scale

    sizes = layer_sizes(d, hidden)
    params = init_params(sizes, rng, activation)
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    step = 0
    batch = min(batch_size, n)
    best = np.inf
    stall = 0
    curve = []
    for epoch in range(epochs):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch):
            idx = perm[start:start + batch]
            loss, grads = loss_and_grad(params, Z[idx], t[idx], activation)
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"loss diverged at epoch {epoch}; lower the learning rate")
            total += loss * len(idx)
            step += 1
            lr_t = learning_rate * np.sqrt(1 - beta2**step) / (1 - beta1**step)
            for p, g, mi, vi in zip(params, grads, m, v):
                mi *= beta1
                mi += (1 - beta1) * g
                vi *= beta2
                vi += (1 - beta2) * g * g
                p -= lr_t * mi / (np.sqrt(vi) + eps)
        epoch_loss = total / n
        curve.append(epoch_loss)
        if epoch_loss > best - tol:
            stall += 1
        else:
            stall = 0
        best = min(best, epoch_loss)
        if stall >= n_iter_no_change:
            log.debug("mlp stopped after %d epochs", epoch + 1)
            break
    return MLP(params, activation, x_mean, x_scale, y_mean, y_scale, curve)
