"""Run metrics: RMSE of a surrogate, sample-based KL divergence, and
Monte Carlo failure probability under independent standard normal inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..gp import GpModel, predict_mean_var


@dataclass(frozen=True)
class FailureEstimate:
    """Monte Carlo failure-probability estimate with its binomial standard error."""

    probability: float
    std_error: float
    n_samples: int


def rmse(gp: GpModel, truth, test_grid) -> float:
    """Root mean square error of the GP predictive mean against ``truth`` on a grid."""
    grid = np.atleast_2d(np.asarray(test_grid, dtype=float))
    means, _ = predict_mean_var(gp, grid)
    residual = means - np.asarray(truth(grid), dtype=float)
    return float(np.sqrt(np.mean(residual**2)))


def standard_normal_bank(n_samples: int, seed: int, dim: int = 2) -> np.ndarray:
    """Frozen bank of iid N(0,1) input samples, reproducible per seed."""
    return np.random.default_rng(seed).standard_normal((n_samples, dim))


def estimate_failure_probability(
    state_fn, n_samples: int = 1_000_000, seed: int = 0, samples: np.ndarray | None = None
) -> FailureEstimate:
    """Fraction of standard-normal inputs with state_fn(x) <= 0.

    Pass ``samples`` to reuse one frozen bank across many surrogates so the
    metric sequence of a design run shares its Monte Carlo noise.
    """
    if samples is None:
        samples = standard_normal_bank(n_samples, seed)
    g = np.asarray(state_fn(samples), dtype=float)
    if g.shape != (len(samples),):
        raise ValueError("state_fn must map (n, dim) inputs to (n,) values")
    n = len(samples)
    p = float(np.mean(g <= 0.0))
    se = math.sqrt(max(p * (1.0 - p), 0.0) / n)
    return FailureEstimate(p, se, n)


def kl_estimate(samples_p, samples_q, k: int = 5) -> float:
    """k-nearest-neighbor estimate of KL(P || Q) from two sample sets.

    Distances to the k-th neighbor are measured excluding self-matches: each
    query point is skipped in its own set, and an exact duplicate of it in the
    other set is skipped too, so identical sample sets score approximately 0.
    """
    p = np.atleast_2d(np.asarray(samples_p, dtype=float))
    q = np.atleast_2d(np.asarray(samples_q, dtype=float))
    if p.shape[1] != q.shape[1]:
        raise ValueError("sample sets must share a dimension")
    n, dim = p.shape
    m = q.shape[0]
    if n <= k or m <= k:
        raise ValueError(f"need more than k={k} samples in each set")

    rho = cKDTree(p).query(p, k=k + 1)[0][:, k]
    dist_q = cKDTree(q).query(p, k=k + 1)[0]
    nu = np.where(dist_q[:, 0] <= 0.0, dist_q[:, k], dist_q[:, k - 1])

    tiny = 1e-12  # guards log() against repeated points (e.g. MCMC duplicates)
    ratio = np.maximum(nu, tiny) / np.maximum(rho, tiny)
    return float(dim * np.mean(np.log(ratio)) + math.log(m / (n - 1.0)))
