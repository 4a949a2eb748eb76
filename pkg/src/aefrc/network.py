"""Sigmoid feedforward networks and sparse denoising autoencoder training.

A network is a plain container of weight matrices and bias vectors; all
layers use the logistic activation. Autoencoders are three-layer
networks trained to reconstruct their input under three pressures: mean
squared reconstruction error, an L2 weight decay, and a KL sparsity
penalty that pulls the average hidden activation toward a small target
rho. Denoising corrupts the input with per-feature white noise at a
fixed signal-to-noise ratio while the reconstruction target stays clean.

Deep encoders are built greedily: train an autoencoder on the data,
keep its encoder half, re-encode the clean data, and repeat on the
codes. The decoder halves are discarded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit as sigmoid

from .errors import DataError, NumericalError
from .optim import OptimizerConfig, minimize
from .seeding import rng_for, spawn_seed
from .serialize import dump_document, fmt_vector, load_document, parse_vector


@dataclass(frozen=True)
class AEConfig:
    """Autoencoder training pressures.

    denoise_snr_db is the per-feature signal-to-noise ratio of the input
    corruption, in decibels; None disables denoising.
    """

    rho: float = 0.1
    beta_sparse: float = 3.0
    weight_decay: float = 1e-4
    denoise_snr_db: float | None = 10.0

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise NumericalError("sparsity target rho must lie strictly between 0 and 1")
        if self.beta_sparse < 0 or self.weight_decay < 0:
            raise NumericalError("penalty weights must be non-negative")


@dataclass
class Network:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]   # weights[l] has shape (layer_sizes[l+1], layer_sizes[l])
    biases: list[np.ndarray]    # biases[l] has shape (layer_sizes[l+1],)

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.layer_sizes) < 2 or any(s < 1 for s in self.layer_sizes):
            raise DataError("a network needs at least two positive layer sizes")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise DataError("parameter count does not match layer_sizes")
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            expect = (self.layer_sizes[l + 1], self.layer_sizes[l])
            if W.shape != expect or b.shape != (expect[0],):
                raise DataError(f"layer {l + 1} parameters have shape {W.shape}, expected {expect}")

    @property
    def depth(self) -> int:
        return len(self.layer_sizes)

    def copy(self) -> "Network":
        return Network(self.layer_sizes,
                       [W.copy() for W in self.weights],
                       [b.copy() for b in self.biases])


def param_count(layer_sizes) -> int:
    return sum(layer_sizes[l + 1] * layer_sizes[l] + layer_sizes[l + 1]
               for l in range(len(layer_sizes) - 1))


def flatten_params(net: Network) -> np.ndarray:
    parts = []
    for W, b in zip(net.weights, net.biases):
        parts.append(W.ravel())
        parts.append(b)
    return np.concatenate(parts)


def unflatten_params(layer_sizes, vec: np.ndarray) -> Network:
    vec = np.asarray(vec, dtype=float)
    if vec.size != param_count(layer_sizes):
        raise DataError(
            f"parameter vector has {vec.size} entries, architecture needs {param_count(layer_sizes)}"
        )
    weights, biases, off = [], [], 0
    for l in range(len(layer_sizes) - 1):
        rows, cols = layer_sizes[l + 1], layer_sizes[l]
        weights.append(vec[off:off + rows * cols].reshape(rows, cols).copy())
        off += rows * cols
        biases.append(vec[off:off + rows].copy())
        off += rows
    return Network(tuple(layer_sizes), weights, biases)


def _views(layer_sizes, vec):
    """Weight/bias views into a flat vector, in flatten_params order."""
    weights, biases, off = [], [], 0
    for l in range(len(layer_sizes) - 1):
        rows, cols = layer_sizes[l + 1], layer_sizes[l]
        weights.append(vec[off:off + rows * cols].reshape(rows, cols))
        off += rows * cols
        biases.append(vec[off:off + rows])
        off += rows
    return weights, biases


def init_network(layer_sizes, rng: np.random.Generator) -> Network:
    """Symmetric uniform weight init scaled by fan-in plus fan-out; zero biases."""
    weights, biases = [], []
    for l in range(len(layer_sizes) - 1):
        fan_in, fan_out = layer_sizes[l], layer_sizes[l + 1]
        r = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-r, r, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Network(tuple(layer_sizes), weights, biases)


def forward(net: Network, X: np.ndarray) -> list[np.ndarray]:
    """All layer activations, input first. Hidden and output values lie in (0, 1)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != net.layer_sizes[0]:
        raise DataError(
            f"input width {X.shape[1]} does not match network input size {net.layer_sizes[0]}"
        )
    acts = [X]
    for W, b in zip(net.weights, net.biases):
        acts.append(sigmoid(acts[-1] @ W.T + b))
    return acts


def kl_bernoulli(rho: float, rho_hat: np.ndarray) -> np.ndarray:
    """Elementwise KL divergence between Bernoulli(rho) and Bernoulli(rho_hat).

    rho_hat is clamped away from 0 and 1 to guard the logs; observed
    average activations of a sigmoid layer stay well inside the clamp.
    """
    q = np.clip(np.asarray(rho_hat, dtype=float), 1e-8, 1.0 - 1e-8)
    return rho * np.log(rho / q) + (1.0 - rho) * np.log((1.0 - rho) / (1.0 - q))


def _ae_cost_grad_flat(vec, layer_sizes, X, O, cfg: AEConfig):
    (W1, W2), (b1, b2) = _views(layer_sizes, vec)
    m = X.shape[0]
    A2 = sigmoid(X @ W1.T + b1)
    A3 = sigmoid(A2 @ W2.T + b2)
    if not (np.all(np.isfinite(A2)) and np.all(np.isfinite(A3))):
        layer = 2 if not np.all(np.isfinite(A2)) else 3
        raise NumericalError(f"non-finite activations at layer {layer}")
    R = A3 - O
    cost = 0.5 / m * float(np.sum(R * R))
    cost += 0.5 * cfg.weight_decay * (float(np.sum(W1 * W1)) + float(np.sum(W2 * W2)))

    D3 = (R / m) * A3 * (1.0 - A3)
    gW2 = D3.T @ A2 + cfg.weight_decay * W2
    gb2 = D3.sum(axis=0)
    back = D3 @ W2
    if cfg.beta_sparse > 0:
        rho_hat = np.clip(A2.mean(axis=0), 1e-8, 1.0 - 1e-8)
        cost += cfg.beta_sparse * float(np.sum(kl_bernoulli(cfg.rho, rho_hat)))
        back = back + (cfg.beta_sparse / m) * (-cfg.rho / rho_hat
                                               + (1.0 - cfg.rho) / (1.0 - rho_hat))
    D2 = back * A2 * (1.0 - A2)
    gW1 = D2.T @ X + cfg.weight_decay * W1
    gb1 = D2.sum(axis=0)
    grad = np.concatenate([gW1.ravel(), gb1, gW2.ravel(), gb2])
    return cost, grad


def ae_cost_grad(ae: Network, X: np.ndarray, O: np.ndarray, cfg: AEConfig):
    """Cost and flat gradient of a three-layer autoencoder.

    Cost is mean squared reconstruction error against O, plus L2 weight
    decay over both weight matrices, plus the KL sparsity penalty on the
    batch-average hidden activation.
    """
    if ae.depth != 3:
        raise DataError("autoencoder cost is defined for exactly one hidden layer")
    X = np.asarray(X, dtype=float)
    O = np.asarray(O, dtype=float)
    if X.shape != O.shape or X.shape[1] != ae.layer_sizes[0]:
        raise DataError("input and reconstruction target shapes must match the autoencoder")
    if X.shape[0] == 0:
        raise DataError("cannot train on an empty batch")
    return _ae_cost_grad_flat(flatten_params(ae), ae.layer_sizes, X, O, cfg)


def target_cost_grad(net: Network, X: np.ndarray, T: np.ndarray):
    """Mean squared error of the final layer against per-sample targets.

    Plain backprop through any depth, no decay and no sparsity; this is
    the workhorse behind target-driven fine-tuning.
    """
    return _target_cost_grad_flat(flatten_params(net), net.layer_sizes, X, T)


def _target_cost_grad_flat(vec, layer_sizes, X, T):
    weights, biases = _views(layer_sizes, vec)
    m = X.shape[0]
    acts = [X]
    for W, b in zip(weights, biases):
        acts.append(sigmoid(acts[-1] @ W.T + b))
    R = acts[-1] - T
    cost = 0.5 / m * float(np.sum(R * R))
    grads = []
    D = (R / m) * acts[-1] * (1.0 - acts[-1])
    for l in range(len(weights) - 1, -1, -1):
        gW = D.T @ acts[l]
        gb = D.sum(axis=0)
        grads.append((gW, gb))
        if l > 0:
            D = (D @ weights[l]) * acts[l] * (1.0 - acts[l])
    grads.reverse()
    return cost, np.concatenate([np.concatenate([gW.ravel(), gb]) for gW, gb in grads])


def corrupt(X: np.ndarray, snr_db: float, seed: int) -> np.ndarray:
    """Add white noise per feature at the given signal-to-noise ratio.

    Noise variance per feature is the feature's mean square divided by
    10^(snr/10); all-zero features receive no noise. Deterministic for a
    fixed seed.
    """
    X = np.asarray(X, dtype=float)
    power = np.mean(X * X, axis=0)
    noise_sd = np.sqrt(power / (10.0 ** (snr_db / 10.0)))
    rng = rng_for(seed, "corrupt")
    return X + rng.standard_normal(X.shape) * noise_sd


def train_ae(X: np.ndarray, hidden: int, cfg: AEConfig, opt: OptimizerConfig,
             seed: int) -> Network:
    """Train one three-layer autoencoder and return it (encoder plus decoder)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("training data must be a non-empty matrix")
    if hidden < 1:
        raise DataError("hidden width must be positive")
    n = X.shape[1]
    layer_sizes = (n, hidden, n)
    net0 = init_network(layer_sizes, rng_for(seed, "init"))
    X_in = corrupt(X, cfg.denoise_snr_db, spawn_seed(seed, "noise")) \
        if cfg.denoise_snr_db is not None else X
    res = minimize(lambda v: _ae_cost_grad_flat(v, layer_sizes, X_in, X, cfg),
                   flatten_params(net0), opt)
    return unflatten_params(layer_sizes, res.x)


def stack(X: np.ndarray, hidden_sizes, cfg: AEConfig, opt: OptimizerConfig,
          seed: int) -> Network:
    """Greedy layerwise pretraining; returns the stacked encoder.

    Each autoencoder trains on the clean codes of the one below (its own
    input corruption is drawn inside train_ae), and only encoder halves
    survive into the result.
    """
    hidden_sizes = tuple(int(h) for h in hidden_sizes)
    if not hidden_sizes:
        raise DataError("need at least one hidden layer to stack")
    X = np.asarray(X, dtype=float)
    codes = X
    weights, biases = [], []
    for i, h in enumerate(hidden_sizes):
        ae = train_ae(codes, h, cfg, opt, spawn_seed(seed, "layer", i))
        weights.append(ae.weights[0])
        biases.append(ae.biases[0])
        codes = sigmoid(codes @ ae.weights[0].T + ae.biases[0])
    return Network((X.shape[1],) + hidden_sizes, weights, biases)


NETWORK_FORMAT = "aefrc-network"
NETWORK_VERSION = 1


def network_to_dict(net: Network) -> dict:
    return {
        "layer_sizes": list(net.layer_sizes),
        "weights": [fmt_vector(W) for W in net.weights],   # row-major
        "biases": [fmt_vector(b) for b in net.biases],
    }


def network_from_dict(d: dict) -> Network:
    try:
        layer_sizes = tuple(int(s) for s in d["layer_sizes"])
        raw_w = d["weights"]
        raw_b = d["biases"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed network document: {exc}") from exc
    weights, biases = [], []
    for l in range(len(layer_sizes) - 1):
        rows, cols = layer_sizes[l + 1], layer_sizes[l]
        weights.append(parse_vector(raw_w[l], rows * cols).reshape(rows, cols))
        biases.append(parse_vector(raw_b[l], rows))
    return Network(layer_sizes, weights, biases)


def save_network(net: Network, path: str) -> None:
    dump_document(network_to_dict(net), path, NETWORK_FORMAT, NETWORK_VERSION)


def load_network(path: str) -> Network:
    return network_from_dict(load_document(path, NETWORK_FORMAT, NETWORK_VERSION))
