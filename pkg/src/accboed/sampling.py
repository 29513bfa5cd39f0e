"""Space-filling design generation over box domains."""

from __future__ import annotations

import numpy as np
from scipy.stats import qmc


def as_domain(domain) -> np.ndarray:
    """Normalize a domain spec to a (dim, 2) float array of [lower, upper] rows."""
    box = np.atleast_2d(np.asarray(domain, dtype=float))
    if box.shape[1] != 2 or np.any(box[:, 1] <= box[:, 0]):
        raise ValueError(f"domain must be (dim, 2) with lower < upper, got {domain!r}")
    return box


def domain_diameter(domain) -> float:
    box = as_domain(domain)
    return float(np.linalg.norm(box[:, 1] - box[:, 0]))


def lhs_sample(n: int, domain, seed) -> np.ndarray:
    """Latin hypercube draw: one point per axis stratum in every dimension,
    uniformly jittered within its stratum.  Deterministic per seed."""
    box = as_domain(domain)
    if n < 1:
        raise ValueError("n must be positive")
    sampler = qmc.LatinHypercube(d=box.shape[0], seed=seed)
    unit = sampler.random(n)
    return qmc.scale(unit, box[:, 0], box[:, 1])


def uniform_sample(n: int, domain, rng) -> np.ndarray:
    """Plain iid-uniform draw over the box."""
    box = as_domain(domain)
    return rng.uniform(box[:, 0], box[:, 1], size=(n, box.shape[0]))


def grid_candidates(domain, points_per_dim: int | None = None) -> np.ndarray:
    """Uniform candidate grid over the box: cartesian product of per-axis grids.

    Defaults to 101 points in one dimension and 41 per axis otherwise.
    """
    box = as_domain(domain)
    dim = box.shape[0]
    if points_per_dim is None:
        points_per_dim = 101 if dim == 1 else 41
    axes = [np.linspace(lo, hi, points_per_dim) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)
