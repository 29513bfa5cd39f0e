"""Kernel mixture network for conditional density estimation q(y | design, poi).

A small feed-forward network maps the concatenated (design, poi) input to
softmax weights over a fixed bank of Gaussian kernels in y.  Only the weights
are learned — centers and bandwidths are frozen at construction from the
empirical distribution of the training targets — so the estimated density is
exactly normalized by construction.  Training minimizes the negative
log-likelihood with plain momentum SGD and is deterministic for a fixed seed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

_LOG_2PI = math.log(2.0 * math.pi)


class InsufficientData(ValueError):
    """Raised when too few records are available to fit the mixture weights."""


@dataclass(frozen=True)
class KmnConfig:
    """Network shape, kernel bank size, and SGD settings."""

    n_centers: int = 25
    hidden_sizes: tuple = (32, 32)
    bandwidths: tuple = (0.5, 1.5)  # factors applied to the center spacing
    learning_rate: float = 0.05
    epochs: int = 150
    batch_size: int = 128
    weight_decay: float = 1e-3  # L2 penalty on weight matrices (not biases)
    seed: int = 0

    def __post_init__(self):
        if self.n_centers < 2:
            raise ValueError("n_centers must be at least 2")
        if not all(b > 0 for b in self.bandwidths):
            raise ValueError("all bandwidth factors must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")


@dataclass(frozen=True)
class CdeRecord:
    """One training triple: a design, a parameter-of-interest point, a y draw."""

    design: np.ndarray
    poi_point: np.ndarray
    y_sample: float

    def __post_init__(self):
        object.__setattr__(self, "design", np.asarray(self.design, dtype=float).ravel())
        object.__setattr__(self, "poi_point", np.asarray(self.poi_point, dtype=float).ravel())
        object.__setattr__(self, "y_sample", float(self.y_sample))


@dataclass
class KmnModel:
    """Trained mixture: layer parameters plus the frozen kernel bank.

    ``layer_weights`` is a list of (W, b) pairs, the last producing logits
    over the flattened kernel bank (one kernel per center/bandwidth pair).
    Inputs are standardized with ``input_mean``/``input_scale`` before the
    first layer.
    """

    layer_weights: list
    centers: np.ndarray
    bandwidths: np.ndarray
    input_mean: np.ndarray
    input_scale: np.ndarray
    design_dim: int
    poi_dim: int
    config: KmnConfig | None = field(default=None, repr=False)

    @property
    def input_dim(self) -> int:
        return self.design_dim + self.poi_dim

    @property
    def n_components(self) -> int:
        return self.centers.shape[0]

    def weights(self, designs: np.ndarray, pois: np.ndarray) -> np.ndarray:
        """Softmax mixture weights, one row per (design, poi) pair."""
        x = _stack_inputs(self, designs, pois)
        _, logits = _forward(self.layer_weights, (x - self.input_mean) / self.input_scale)
        return _softmax(logits)

    def density_batch(self, ys, designs, pois) -> np.ndarray:
        """q(y_b | design_b, poi_b) for every row b."""
        return np.exp(self.log_density_batch(ys, designs, pois))

    def log_density_batch(self, ys, designs, pois) -> np.ndarray:
        x = _stack_inputs(self, designs, pois)
        _, logits = _forward(self.layer_weights, (x - self.input_mean) / self.input_scale)
        log_w = logits - _logsumexp(logits)
        log_phi = _log_kernels(np.asarray(ys, dtype=float).ravel(), self.centers, self.bandwidths)
        return _logsumexp(log_w + log_phi)[:, 0]

    def predictive_normalizer(self, mean, variance, designs, pois) -> np.ndarray:
        """E_{y ~ N(mean, variance)}[q(y | design_b, poi_b)] for every row b.

        Because the kernel bank is Gaussian, the expectation of the mixture
        under a Gaussian is available in closed form as a mixture of
        convolution values: sum_k w_k N(centers_k | mean, bandwidths_k^2 +
        variance).  ``mean``/``variance`` may be scalars or per-row arrays.
        """
        weights = self.weights(designs, pois)
        mean = np.asarray(mean, dtype=float).reshape(-1, 1)
        variance = np.asarray(variance, dtype=float).reshape(-1, 1)
        if np.any(variance < 0.0):
            raise ValueError("variance must be >= 0")
        var = self.bandwidths**2 + variance
        log_phi = -0.5 * (self.centers - mean) ** 2 / var - 0.5 * np.log(2.0 * np.pi * var)
        return np.sum(weights * np.exp(log_phi), axis=1)

    def expected_information(self, mean, variance, designs, pois,
                             n_nodes: int = 40) -> np.ndarray:
        """E_{y ~ g_b}[log(q_b(y) / C_b)] per row, where g_b ∝ N(mean, variance) * q_b.

        ``q_b`` is the mixture for row b, ``C_b = E_{N(mean, variance)}[q_b]``
        its predictive normalizer, and ``g_b`` the normalized product of the
        Gaussian with the mixture.  That makes each value the KL divergence
        from ``g_b`` to N(mean, variance), so it is nonnegative and exactly
        zero whenever the mixture carries no information (q_b constant over
        the Gaussian's support, or variance zero).

        The product of a Gaussian with each bank kernel is again Gaussian
        with closed-form mass, so the integral splits over components and is
        evaluated by ``n_nodes``-point Gauss-Hermite quadrature per
        component — fully deterministic, no sampling.  ``mean`` and
        ``variance`` are scalars shared by all rows (one predictive, many
        conditioning points).  Rows whose normalizer underflows to zero
        return ``inf``; callers decide how to treat them.
        """
        variance = float(variance)
        if variance < 0.0:
            raise ValueError("variance must be >= 0")
        mean = float(mean)
        weights = self.weights(designs, pois)
        h2 = self.bandwidths**2
        tot = h2 + variance
        log_mass = -0.5 * (self.centers - mean) ** 2 / tot - 0.5 * np.log(2.0 * np.pi * tot)
        mass = np.exp(log_mass)
        normalizer = weights @ mass

        # Product component moments (independent of the row).
        prod_var = variance * h2 / tot
        prod_mean = (variance * self.centers + h2 * mean) / tot

        nodes, node_weights = np.polynomial.hermite_e.hermegauss(n_nodes)
        node_weights = node_weights / node_weights.sum()
        ys = (prod_mean[:, None] + np.sqrt(prod_var)[:, None] * nodes[None, :]).ravel()

        # log q_b at every node, via a stabilized matmul in probability space.
        log_phi = _log_kernels(ys, self.centers, self.bandwidths)
        shift = log_phi.max(axis=1, keepdims=True)
        with np.errstate(divide="ignore"):
            log_q = np.log(weights @ np.exp(log_phi - shift).T) + shift.ravel()[None, :]
        mean_log_q = log_q.reshape(-1, self.n_components, n_nodes) @ node_weights

        with np.errstate(divide="ignore", invalid="ignore"):
            values = ((weights * mass[None, :] * mean_log_q).sum(axis=1) / normalizer
                      - np.log(normalizer))
        return np.where(normalizer > 0.0, values, np.inf)


def _stack_inputs(model: KmnModel, designs, pois) -> np.ndarray:
    designs = np.atleast_2d(np.asarray(designs, dtype=float))
    pois = np.atleast_2d(np.asarray(pois, dtype=float))
    if designs.shape[1] != model.design_dim or pois.shape[1] != model.poi_dim:
        raise ValueError(
            f"expected design dim {model.design_dim} and poi dim {model.poi_dim}, "
            f"got {designs.shape[1]} and {pois.shape[1]}"
        )
    return np.hstack([np.broadcast_to(designs, (max(len(designs), len(pois)), designs.shape[1])),
                      np.broadcast_to(pois, (max(len(designs), len(pois)), pois.shape[1]))])


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _logsumexp(a: np.ndarray) -> np.ndarray:
    m = a.max(axis=1, keepdims=True)
    return m + np.log(np.exp(a - m).sum(axis=1, keepdims=True))


def _log_kernels(ys: np.ndarray, centers: np.ndarray, bandwidths: np.ndarray) -> np.ndarray:
    """log N(y_b | mu_i, h_i^2) as a (B, n_components) array."""
    z = (ys[:, None] - centers[None, :]) / bandwidths[None, :]
    return -0.5 * z * z - np.log(bandwidths)[None, :] - 0.5 * _LOG_2PI


def _forward(layers, x):
    """Hidden activations and final logits; returns (list of tanh layers, logits)."""
    hs = [x]
    for w, b in layers[:-1]:
        hs.append(np.tanh(hs[-1] @ w.T + b))
    w, b = layers[-1]
    return hs, hs[-1] @ w.T + b


def build_centers(y_values, n_centers: int, bandwidth_factors=(0.5, 1.5)):
    """Kernel bank from data: quantile centers, spacing-scaled bandwidths.

    Centers are the ``n_centers`` empirical quantiles of ``y_values`` at
    equally spaced probabilities; each center receives one bandwidth per
    factor, scaled by the local spacing between adjacent centers.  Returns
    (centers (K,), bandwidths (K, n_factors)).
    """
    y_values = np.asarray(y_values, dtype=float).ravel()
    if y_values.size == 0:
        raise ValueError("y_values must be non-empty")
    if n_centers < 2:
        raise ValueError("n_centers must be at least 2")
    probs = np.linspace(0.0, 1.0, n_centers)
    centers = np.quantile(y_values, probs)
    if centers[-1] == centers[0]:
        # All values identical: inflate into a small symmetric spread.
        scale = 1e-3 * (1.0 + abs(centers[0]))
        centers = centers[0] + np.linspace(-scale, scale, n_centers)
        warnings.warn(
            "all y values identical; kernel centers inflated artificially",
            RuntimeWarning,
            stacklevel=2,
        )
    gaps = np.diff(centers)
    positive = gaps[gaps > 0]
    fallback = positive.mean() if positive.size else 1e-3 * (1.0 + abs(centers[0]))
    gaps = np.where(gaps > 0, gaps, fallback)
    # Local spacing: average of the two adjacent gaps (single gap at the ends).
    spacing = np.empty(n_centers)
    spacing[0] = gaps[0]
    spacing[-1] = gaps[-1]
    spacing[1:-1] = 0.5 * (gaps[:-1] + gaps[1:])
    bandwidths = spacing[:, None] * np.asarray(bandwidth_factors, dtype=float)[None, :]
    return centers, bandwidths


def kmn_density(model: KmnModel, y: float, design, poi_point) -> float:
    """Mixture density q(y | design, poi_point); strictly positive."""
    return float(model.density_batch([y], np.atleast_2d(design), np.atleast_2d(poi_point))[0])


def _records_to_arrays(records):
    designs = np.vstack([r.design for r in records])
    pois = np.vstack([r.poi_point for r in records])
    ys = np.array([r.y_sample for r in records])
    return designs, pois, ys


def _init_layers(rng, layer_sizes):
    layers = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        w = rng.normal(0.0, 1.0 / math.sqrt(fan_in), (fan_out, fan_in))
        layers.append((w, np.zeros(fan_out)))
    return layers


def _nll_and_grads(layers, x_std, log_phi):
    """Mean NLL over the batch and gradients for every (W, b) pair."""
    hs, logits = _forward(layers, x_std)
    log_w = logits - _logsumexp(logits)
    log_p = _logsumexp(log_w + log_phi)
    nll = -float(log_p.mean())

    batch = x_std.shape[0]
    w = np.exp(log_w)
    r = np.exp(log_w + log_phi - log_p)
    delta = (w - r) / batch  # d nll / d logits
    grads = [None] * len(layers)
    for idx in range(len(layers) - 1, -1, -1):
        w_mat, _ = layers[idx]
        grads[idx] = (delta.T @ hs[idx], delta.sum(axis=0))
        if idx > 0:
            delta = (delta @ w_mat) * (1.0 - hs[idx] ** 2)
    return nll, grads


def _full_nll(layers, x_std, log_phi) -> float:
    _, logits = _forward(layers, x_std)
    log_w = logits - _logsumexp(logits)
    return -float(_logsumexp(log_w + log_phi).mean())


def train_kmn(records, config: KmnConfig) -> KmnModel:
    """Fit mixture weights to the records by momentum SGD on the NLL.

    The learning rate follows a cosine decay from its configured value to
    5% of it across the epoch budget, so late epochs settle into a minimum
    instead of oscillating around it.  Keeps the best parameters seen
    (measured by full-data NLL), so the returned model is never worse than
    the freshly initialized one.  A non-finite loss triggers up to three
    restarts at halved learning rates.
    """
    records = list(records)
    if len(records) < 10 * config.n_centers:
        raise InsufficientData(
            f"need at least {10 * config.n_centers} records, got {len(records)}"
        )
    designs, pois, ys = _records_to_arrays(records)
    centers, bw = build_centers(ys, config.n_centers, config.bandwidths)
    centers_flat = np.repeat(centers, bw.shape[1])
    bandwidths_flat = bw.ravel()

    x = np.hstack([designs, pois])
    input_mean = x.mean(axis=0)
    input_scale = x.std(axis=0)
    input_scale[input_scale < 1e-12] = 1.0
    x_std = (x - input_mean) / input_scale
    log_phi = _log_kernels(ys, centers_flat, bandwidths_flat)

    layer_sizes = [x.shape[1], *config.hidden_sizes, centers_flat.shape[0]]
    n = len(records)

    lr = config.learning_rate
    last_error = None
    for _attempt in range(4):
        rng = np.random.default_rng(config.seed)
        layers = _init_layers(rng, layer_sizes)
        best_layers = [(w.copy(), b.copy()) for w, b in layers]
        best_nll = _full_nll(layers, x_std, log_phi)
        velocity = [(np.zeros_like(w), np.zeros_like(b)) for w, b in layers]
        diverged = False

        for _epoch in range(config.epochs):
            progress = _epoch / max(config.epochs - 1, 1)
            epoch_lr = lr * (0.05 + 0.95 * 0.5 * (1.0 + math.cos(math.pi * progress)))
            order = rng.permutation(n) if config.batch_size < n else np.arange(n)
            for lo in range(0, n, config.batch_size):
                idx = order[lo:lo + config.batch_size]
                nll, grads = _nll_and_grads(layers, x_std[idx], log_phi[idx])
                if not math.isfinite(nll):
                    diverged = True
                    break
                new_layers, new_velocity = [], []
                for (w, b), (vw, vb), (gw, gb) in zip(layers, velocity, grads):
                    vw = 0.9 * vw - epoch_lr * (gw + config.weight_decay * w)
                    vb = 0.9 * vb - epoch_lr * gb
                    new_layers.append((w + vw, b + vb))
                    new_velocity.append((vw, vb))
                layers, velocity = new_layers, new_velocity
            if diverged:
                break
            epoch_nll = _full_nll(layers, x_std, log_phi)
            if math.isfinite(epoch_nll) and epoch_nll < best_nll:
                best_nll = epoch_nll
                best_layers = [(w.copy(), b.copy()) for w, b in layers]

        if not diverged:
            return KmnModel(
                layer_weights=best_layers,
                centers=centers_flat,
                bandwidths=bandwidths_flat,
                input_mean=input_mean,
                input_scale=input_scale,
                design_dim=designs.shape[1],
                poi_dim=pois.shape[1],
                config=config,
            )
        last_error = f"non-finite loss at learning rate {lr:g}"
        lr *= 0.5

    raise RuntimeError(f"training failed after 3 restarts: {last_error}")


FORMAT_VERSION = 1


def save_kmn(model: KmnModel, path) -> None:
    """Serialize every array of the model to a single .npz file."""
    payload = {
        "format_version": np.array(FORMAT_VERSION),
        "n_layers": np.array(len(model.layer_weights)),
        "centers": model.centers,
        "bandwidths": model.bandwidths,
        "input_mean": model.input_mean,
        "input_scale": model.input_scale,
        "dims": np.array([model.design_dim, model.poi_dim]),
    }
    for i, (w, b) in enumerate(model.layer_weights):
        payload[f"w{i}"] = w
        payload[f"b{i}"] = b
    np.savez(path, **payload)


def load_kmn(path) -> KmnModel:
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {version}")
        layers = [
            (data[f"w{i}"], data[f"b{i}"]) for i in range(int(data["n_layers"]))
        ]
        dims = data["dims"]
        return KmnModel(
            layer_weights=layers,
            centers=data["centers"],
            bandwidths=data["bandwidths"],
            input_mean=data["input_mean"],
            input_scale=data["input_scale"],
            design_dim=int(dims[0]),
            poi_dim=int(dims[1]),
        )
