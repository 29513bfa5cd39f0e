"""One-dimensional Gaussian densities, their pointwise ratios, and KL divergence.

The design-selection machinery repeatedly compares two scalar Gaussian
predictive densities at the same query point: an "unconstrained" one and a
tighter one obtained after conditioning on a virtual observation.  Their
pointwise quotient is again an (unnormalized) Gaussian, and the closed-form
KL divergence between the pair acts as the reference value the accelerated
estimator is validated against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_LOG_2PI = math.log(2.0 * math.pi)

# Relative slack below which the numerator variance is considered too close
# to the denominator variance for the ratio to be a proper Gaussian.
_DEGENERACY_RTOL = 1e-8


class DegenerateRatio(ValueError):
    """Raised when the numerator Gaussian is not strictly tighter than the denominator.

    The quotient N(y|m1,v1)/N(y|m2,v2) is a Gaussian in y only when v1 < v2;
    otherwise it is flat or grows without bound.  Callers treat this as "the
    constraint carries no information" and fall back to the trivial ratio 1.
    """

    def __init__(self, num_variance: float, den_variance: float):
        self.num_variance = float(num_variance)
        self.den_variance = float(den_variance)
        super().__init__(
            f"ratio of Gaussians is degenerate: numerator variance "
            f"{num_variance!r} is not strictly below denominator variance "
            f"{den_variance!r}"
        )


@dataclass(frozen=True)
class ScalarGaussian:
    """A proper one-dimensional Gaussian density N(mean, variance)."""

    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance > 0.0:
            raise ValueError(f"variance must be positive, got {self.variance!r}")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class RatioGaussian:
    """An unnormalized Gaussian exp(log_norm) * N(mean, variance).

    This is the exact form of the pointwise quotient of two Gaussian
    densities when the numerator is strictly tighter than the denominator.
    """

    mean: float
    variance: float
    log_norm: float

    def __post_init__(self):
        if not self.variance > 0.0:
            raise ValueError(f"variance must be positive, got {self.variance!r}")
        if not math.isfinite(self.log_norm):
            raise ValueError(f"log_norm must be finite, got {self.log_norm!r}")


def gaussian_logpdf(g: ScalarGaussian, y) -> float:
    """Log-density of ``g`` at ``y``.  ``y`` may be a scalar or ndarray."""
    diff = y - g.mean
    return -0.5 * (diff * diff) / g.variance - 0.5 * (_LOG_2PI + math.log(g.variance))


def gaussian_ratio(num: ScalarGaussian, den: ScalarGaussian) -> RatioGaussian:
    """Express num.pdf(y) / den.pdf(y) as exp(log_norm) * N(y | mean, variance).

    Requires num.variance strictly below den.variance (up to a relative
    slack of 1e-8); raises :class:`DegenerateRatio` otherwise.  All
    normalization bookkeeping is done in log space so the result stays
    finite even when the plain normalizer would under- or overflow.
    """
    v1, v2 = num.variance, den.variance
    if v1 >= v2 * (1.0 - _DEGENERACY_RTOL):
        raise DegenerateRatio(v1, v2)
    inv_var = 1.0 / v1 - 1.0 / v2
    variance = 1.0 / inv_var
    mean = variance * (num.mean / v1 - den.mean / v2)
    # Evaluate the quotient of the two log-densities at the ratio's own mean;
    # there the N(mean, variance) factor contributes its peak value
    # -0.5*log(2*pi*variance), which pins down log_norm exactly.
    log_ratio_at_mean = gaussian_logpdf(num, mean) - gaussian_logpdf(den, mean)
    log_norm = log_ratio_at_mean + 0.5 * (_LOG_2PI + math.log(variance))
    return RatioGaussian(mean=mean, variance=variance, log_norm=log_norm)


def gaussian_kl(p: ScalarGaussian, q: ScalarGaussian) -> float:
    """KL(p || q) between two scalar Gaussians, in nats.

    Closed form: log(s_q/s_p) + (s_p^2 + (m_p - m_q)^2) / (2 s_q^2) - 1/2.
    Clamped at zero to absorb floating-point cancellation when p == q.
    """
    diff = p.mean - q.mean
    value = (
        0.5 * math.log(q.variance / p.variance)
        + (p.variance + diff * diff) / (2.0 * q.variance)
        - 0.5
    )
    return max(0.0, value)
