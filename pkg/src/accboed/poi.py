"""Parameter-of-interest target densities and a random-walk MCMC sampler.

Three problem framings share one sampler: exploration weighted by the
surrogate's predictive spread, a posterior over inputs given one observed
outcome, and a soft concentration on the zero level set of the surrogate
mean.  The sampler is a vectorized random-walk Metropolis scheme — all
chains advance in lockstep with per-chain RNG streams, and the proposal
scale adapts toward a 30% acceptance rate during burn-in.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .gp import GpModel, predict_mean_var
from .sampling import as_domain, domain_diameter, lhs_sample

VARIANCE_WEIGHTED = "variance_weighted"
POSTERIOR_GIVEN_Y0 = "posterior_given_y0"
LIMIT_STATE = "limit_state"
_VARIANTS = (VARIANCE_WEIGHTED, POSTERIOR_GIVEN_Y0, LIMIT_STATE)

_LOG_2PI = math.log(2.0 * math.pi)
_TARGET_ACCEPTANCE = 0.30
_ADAPT_INTERVAL = 50


class SamplerStuck(RuntimeError):
    """Proposal scale collapsed without any acceptances."""


@dataclass(frozen=True)
class PoiKind:
    """Which target density to sample, with its framing-specific constants.

    ``lik_variance`` is the observation-noise part of the likelihood for the
    posterior framing (the surrogate's own predictive variance is added on
    top, point by point).  ``lam`` is the limit-state bandwidth; if None it
    is resolved from the current surrogate via default_limit_state_lambda.
    """

    variant: str
    y0: float | None = None
    lik_variance: float | None = None
    lam: float | None = None

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown poi variant {self.variant!r}")
        if self.variant == POSTERIOR_GIVEN_Y0:
            if self.y0 is None:
                raise ValueError("posterior_given_y0 requires y0")
            if self.lik_variance is None or not self.lik_variance > 0:
                raise ValueError("posterior_given_y0 requires positive lik_variance")
        if self.variant == LIMIT_STATE and self.lam is not None and not self.lam > 0:
            raise ValueError("lam must be positive")


@dataclass(frozen=True)
class McmcConfig:
    n_samples: int = 300
    burn_in: int = 300
    proposal_scale: float = 0.1  # fraction of the domain diameter
    n_chains: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")
        if not self.proposal_scale > 0:
            raise ValueError("proposal_scale must be positive")
        if self.n_samples < 1 or self.burn_in < 0:
            raise ValueError("n_samples must be >= 1 and burn_in >= 0")


@dataclass(frozen=True)
class SampleSet:
    """Pooled MCMC output: points (n, dim) and the post-burn-in acceptance rate.

    ``flagged`` marks runs whose acceptance rate left [0.05, 0.95] despite
    adaptation — usable, but worth suspicion.
    """

    points: np.ndarray
    acceptance_rate: float
    flagged: bool = False


def default_limit_state_lambda(gp: GpModel, domain, points_per_dim: int = 21) -> float:
    """Bandwidth heuristic: a tenth of the spread of the surrogate mean."""
    from .sampling import grid_candidates

    grid = grid_candidates(domain, points_per_dim)
    means, _ = predict_mean_var(gp, grid)
    spread = float(np.std(means))
    if spread <= 0.0:
        spread = 1.0
    return 0.1 * spread


def poi_logdensity_batch(kind: PoiKind, gp: GpModel, zs: np.ndarray, domain=None) -> np.ndarray:
    """Unnormalized log target at each row of ``zs`` (assumed inside the domain)."""
    zs = np.atleast_2d(np.asarray(zs, dtype=float))
    means, variances = predict_mean_var(gp, zs)
    if kind.variant == VARIANCE_WEIGHTED:
        return 0.5 * np.log(np.maximum(variances, 1e-300))
    if kind.variant == POSTERIOR_GIVEN_Y0:
        total_var = variances + kind.lik_variance
        log_lik = -0.5 * (kind.y0 - means) ** 2 / total_var - 0.5 * (np.log(total_var) + _LOG_2PI)
        if domain is not None:
            box = as_domain(domain)
            log_lik = log_lik - float(np.sum(np.log(box[:, 1] - box[:, 0])))
        return log_lik
    lam = kind.lam if kind.lam is not None else default_limit_state_lambda(gp, domain)
    return -np.abs(means) / lam


def poi_logdensity(kind: PoiKind, gp: GpModel, z, domain=None) -> float:
    return float(poi_logdensity_batch(kind, gp, np.atleast_2d(z), domain)[0])


def make_logdensity(kind: PoiKind, gp: GpModel, domain):
    """Batched closure over an immutable surrogate snapshot, for mh_sample.

    For the limit-state framing the bandwidth is resolved once here, so every
    evaluation during one MCMC run sees the same target.
    """
    if kind.variant == LIMIT_STATE and kind.lam is None:
        kind = PoiKind(LIMIT_STATE, lam=default_limit_state_lambda(gp, domain))
    frozen = kind

    def logdensity(zs: np.ndarray) -> np.ndarray:
        return poi_logdensity_batch(frozen, gp, zs, domain)

    return logdensity


def mh_sample(logdensity, domain, cfg: McmcConfig) -> SampleSet:
    """Random-walk Metropolis over a box domain.

    ``logdensity`` must map an (m, dim) array to (m,) unnormalized log
    densities.  Chains start at Latin hypercube points and advance in
    lockstep; proposals landing outside the box are rejected outright, so
    every returned point lies inside the domain.  Post-burn-in states are
    pooled time-major across chains and thinned to ``n_samples``.
    """
    box = as_domain(domain)
    dim = box.shape[0]
    diameter = domain_diameter(box)
    scale = cfg.proposal_scale * diameter

    n_keep_steps = max(1, math.ceil(2 * cfg.n_samples / cfg.n_chains))
    total_steps = cfg.burn_in + n_keep_steps

    # Per-chain RNG streams, pre-drawn so the lockstep loop stays vectorized.
    noise = np.empty((total_steps, cfg.n_chains, dim))
    log_uniforms = np.empty((total_steps, cfg.n_chains))
    for c in range(cfg.n_chains):
        chain_rng = np.random.default_rng([cfg.seed, c])
        noise[:, c, :] = chain_rng.normal(size=(total_steps, dim))
        log_uniforms[:, c] = np.log(chain_rng.uniform(size=total_steps))

    states = lhs_sample(cfg.n_chains, box, seed=cfg.seed)
    log_dens = np.asarray(logdensity(states), dtype=float)
    if not np.any(np.isfinite(log_dens)):
        raise ValueError("log density is not finite at any initial chain state")

    kept = np.empty((n_keep_steps, cfg.n_chains, dim))
    accepted_post = 0
    window_accepts = 0
    stall = 0
    stall_limit = 10 * dim

    for t in range(total_steps):
        proposals = states + scale * noise[t]
        inside = np.all((proposals >= box[:, 0]) & (proposals <= box[:, 1]), axis=1)
        prop_dens = np.full(cfg.n_chains, -np.inf)
        if np.any(inside):
            prop_dens[inside] = logdensity(proposals[inside])
        accept = log_uniforms[t] < (prop_dens - log_dens)
        states = np.where(accept[:, None], proposals, states)
        log_dens = np.where(accept, prop_dens, log_dens)

        n_acc = int(accept.sum())
        if n_acc == 0:
            stall += 1
            if stall >= stall_limit:
                scale *= 0.5
                stall = 0
                if scale < 1e-12 * diameter:
                    raise SamplerStuck(
                        "proposal scale underflowed with no acceptances"
                    )
        else:
            stall = 0

        if t < cfg.burn_in:
            window_accepts += n_acc
            if (t + 1) % _ADAPT_INTERVAL == 0:
                rate = window_accepts / (_ADAPT_INTERVAL * cfg.n_chains)
                scale *= math.exp(rate - _TARGET_ACCEPTANCE)
                window_accepts = 0
        else:
            accepted_post += n_acc
            kept[t - cfg.burn_in] = states

    pooled = kept.reshape(-1, dim)
    idx = np.floor(np.linspace(0, pooled.shape[0] - 1, cfg.n_samples)).astype(int)
    rate = accepted_post / (n_keep_steps * cfg.n_chains)
    return SampleSet(
        points=pooled[idx],
        acceptance_rate=rate,
        flagged=not (0.05 <= rate <= 0.95),
    )


def save_samples_csv(samples: SampleSet, path) -> None:
    """Write the sample points to CSV, one coordinate column per dimension."""
    points = np.atleast_2d(samples.points)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"z_{i}" for i in range(points.shape[1])])
        writer.writerows(points.tolist())
