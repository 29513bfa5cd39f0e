"""Closed-form benchmark response surfaces.

All models are vectorized over the last axis of their input: an array of
shape (..., dim) yields values of shape (...).  Reliability state functions
follow the convention that failure is the event g(x) <= 0.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf as _erf

TRIG_DOMAIN = ((-4.0, 8.0), (-4.0, 8.0))
ERF_DOMAIN = ((0.0, 1.0),)
RELIABILITY_DOMAIN = ((-10.0, 10.0), (-10.0, 10.0))

_SQRT2 = math.sqrt(2.0)


def trig_model(x) -> np.ndarray:
    """Smooth two-dimensional surface sin(x1) * cos(x2)."""
    x = np.asarray(x, dtype=float)
    return np.sin(x[..., 0]) * np.cos(x[..., 1])


def erf_model(theta, noise_std: float = 0.0, rng=None) -> np.ndarray:
    """Gaussian error function response, elementwise over ``theta``.

    With ``noise_std`` > 0 the noise enters *inside* the argument:
    y = erf(theta + eps), eps ~ N(0, noise_std^2).
    """
    theta = np.asarray(theta, dtype=float)
    if noise_std > 0.0:
        if rng is None:
            raise ValueError("rng is required when noise_std > 0")
        theta = theta + rng.normal(0.0, noise_std, size=theta.shape)
    return _erf(theta)


def circle_model(x) -> np.ndarray:
    """Circular limit state g = 12 - x1^2 - x2^2 (failure boundary r = sqrt(12))."""
    x = np.asarray(x, dtype=float)
    return 12.0 - x[..., 0] ** 2 - x[..., 1] ** 2


def four_branch_model(x) -> np.ndarray:
    """Series system of four branches; the failure boundary has sharp corners."""
    x = np.asarray(x, dtype=float)
    a = x[..., 0]
    b = x[..., 1]
    quad = 3.0 + 0.1 * (a - b) ** 2
    diag = (a + b) / _SQRT2
    branches = np.stack(
        [
            quad - diag,
            quad + diag,
            (a - b) + 7.0 / _SQRT2,
            (b - a) + 7.0 / _SQRT2,
        ],
        axis=0,
    )
    return np.min(branches, axis=0)
