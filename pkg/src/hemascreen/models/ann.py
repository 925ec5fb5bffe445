"""Feed-forward binary classifier trained by mini-batch adaptive gradient descent.

Architecture: input -> three hidden layers -> single logistic output.
The loss is binary cross-entropy computed directly from logits
(softplus(z) - y*z), which is exact and stable without probability
clamping; clamping only applies when probabilities are reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import NonFinite
from ..seeding import rng_for
from .common import sigmoid

DEFAULT_HIDDEN = (32, 16, 8)


@dataclass(frozen=True)
class AnnConfig:
    hidden: tuple[int, ...] = DEFAULT_HIDDEN
    activation: str = "relu"  # relu | tanh
    epochs: int = 100
    learning_rate: float = 1e-3
    batch_size: int = 16
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.activation not in ("relu", "tanh"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class AnnModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    config: AnnConfig
    seed: int
    loss_trace: list[float] = field(default_factory=list)

    def raw_scores(self, X: np.ndarray, manifest=None) -> np.ndarray:
        logits, _ = forward_logits(self.weights, self.biases, self.config.activation, X)
        return sigmoid(logits)


def init_params(n_inputs: int, hidden: tuple[int, ...], activation: str, seed: int):
    """Seed-deterministic init: He scaling for relu layers, Xavier for tanh."""
    rng = rng_for(seed, "ann-init")
    sizes = [n_inputs, *hidden, 1]
    gain = 2.0 if activation == "relu" else 1.0
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        scale = math.sqrt((gain if i < len(sizes) - 2 else 1.0) / fan_in)
        weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _act(z: np.ndarray, activation: str) -> np.ndarray:
    return np.maximum(z, 0.0) if activation == "relu" else np.tanh(z)


def _act_grad(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return (z > 0.0).astype(float)
    t = np.tanh(z)
    return 1.0 - t * t


def forward_logits(weights, biases, activation, X):
    """Output logits plus all hidden pre-activations (for kink detection)."""
    a = np.asarray(X, dtype=float)
    preacts = []
    for W, b in zip(weights[:-1], biases[:-1]):
        z = a @ W + b
        preacts.append(z)
        a = _act(z, activation)
    logits = (a @ weights[-1] + biases[-1]).ravel()
    return logits, preacts


def bce_loss(logits: np.ndarray, y: np.ndarray) -> float:
    """Mean binary cross-entropy from logits: softplus(z) - y*z."""
    z = logits
    return float(np.mean(np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z))) - y * z))


def bce_gradients(weights, biases, activation, X, y):
    """Loss and analytic gradients for every layer."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    m = X.shape[0]

    activations = [X]
    preacts = []
    a = X
    for W, b in zip(weights[:-1], biases[:-1]):
        z = a @ W + b
        preacts.append(z)
        a = _act(z, activation)
        activations.append(a)
    logits = (a @ weights[-1] + biases[-1]).ravel()
    loss = bce_loss(logits, y)

    grad_w = [None] * len(weights)
    grad_b = [None] * len(biases)
    delta = ((sigmoid(logits) - y) / m)[:, None]
    grad_w[-1] = activations[-1].T @ delta
    grad_b[-1] = delta.sum(axis=0)
    for layer in range(len(weights) - 2, -1, -1):
        delta = (delta @ weights[layer + 1].T) * _act_grad(preacts[layer], activation)
        grad_w[layer] = activations[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
    return loss, grad_w, grad_b


def train_ann(X: np.ndarray, y_labels, config: AnnConfig | None = None, seed: int = 0) -> AnnModel:
    """Train for exactly config.epochs epochs; epochs=0 returns the init.

    The per-epoch full-data loss trace is recorded for diagnostics (it is
    not required to be monotone).  Raises NonFinite with the epoch index
    if the loss leaves the reals.
    """
    config = config or AnnConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y_labels, dtype=float)
    weights, biases = init_params(X.shape[1], config.hidden, config.activation, seed)

    m_w = [np.zeros_like(w) for w in weights]
    v_w = [np.zeros_like(w) for w in weights]
    m_b = [np.zeros_like(b) for b in biases]
    v_b = [np.zeros_like(b) for b in biases]
    step = 0

    shuffle_rng = rng_for(seed, "ann-batches")
    trace = []
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(X.shape[0])
        for start in range(0, X.shape[0], config.batch_size):
            batch = order[start : start + config.batch_size]
            _, gw, gb = bce_gradients(weights, biases, config.activation, X[batch], y[batch])
            step += 1
            bc1 = 1.0 - config.beta1**step
            bc2 = 1.0 - config.beta2**step
            for i in range(len(weights)):
                m_w[i] = config.beta1 * m_w[i] + (1 - config.beta1) * gw[i]
                v_w[i] = config.beta2 * v_w[i] + (1 - config.beta2) * gw[i] ** 2
                weights[i] -= config.learning_rate * (m_w[i] / bc1) / (np.sqrt(v_w[i] / bc2) + config.eps)
                m_b[i] = config.beta1 * m_b[i] + (1 - config.beta1) * gb[i]
                v_b[i] = config.beta2 * v_b[i] + (1 - config.beta2) * gb[i] ** 2
                biases[i] -= config.learning_rate * (m_b[i] / bc1) / (np.sqrt(v_b[i] / bc2) + config.eps)

        logits, _ = forward_logits(weights, biases, config.activation, X)
        epoch_loss = bce_loss(logits, y)
        if not math.isfinite(epoch_loss):
            raise NonFinite(f"training loss non-finite at epoch {epoch}")
        trace.append(epoch_loss)

    return AnnModel(weights=weights, biases=biases, config=config, seed=seed, loss_trace=trace)


def ann_config_from(hyperparams: dict) -> AnnConfig:
    base = AnnConfig()
    known = {f for f in base.__dataclass_fields__}
    overrides = {k: v for k, v in hyperparams.items() if k in known}
    if "hidden" in overrides:
        overrides["hidden"] = tuple(overrides["hidden"])
    return replace(base, **overrides)
