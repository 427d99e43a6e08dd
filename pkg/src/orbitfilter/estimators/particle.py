"""Bootstrap particle filter with roughening."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dynamics import RangeObservation, measure
from .common import EstimationError, NoiseConfig, Transition, mvn_draws, offset_mean

PARTICLE_COUNT = 10
ROUGHENING_K = 0.1


@dataclass(frozen=True)
class RougheningConfig:
    tuning_k: float = ROUGHENING_K
    state_dim: int = 6

    def __post_init__(self):
        if self.tuning_k < 0:
            raise ValueError("roughening K must be non-negative")
        if self.state_dim < 1:
            raise ValueError("state_dim must be positive")


@dataclass
class ParticleSet:
    particles: np.ndarray  # (N, 6)
    weights: np.ndarray  # (N,), sums to one
    rng: np.random.Generator = field(repr=False)
    # last measurement update, kept for inspection
    likelihoods: np.ndarray | None = None
    updated_weights: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.particles.shape[0]

    def weighted_mean(self) -> np.ndarray:
        return self.weights @ self.particles


def effective_sample_size(weights) -> float:
    """``1 / sum(w^2)`` for normalised weights.

    Evaluated as ``(sum u)^2 / sum u^2`` with ``u = w / max(w)``, which is
    the same quantity but exactly ``N`` for uniform weights.
    """
    w = np.asarray(weights, dtype=float)
    u = w / w.max()
    return float(u.sum() ** 2 / (u @ u))


def _normalized_from_log(logw: np.ndarray) -> np.ndarray:
    if not np.any(np.isfinite(logw)):
        raise EstimationError("likelihood underflow for every particle")
    w = np.exp(logw - np.max(logw))
    return w / w.sum()


def gaussian_loglik(obs_value: float, predicted: np.ndarray, variance: float) -> np.ndarray:
    r = obs_value - predicted
    return -0.5 * r * r / variance - 0.5 * np.log(2.0 * np.pi * variance)


def multinomial_resample(weights, n: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of ``n`` independent draws with probabilities ``weights``."""
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(n), side="right")


def systematic_resample(weights, n: int, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    u = (rng.random() + np.arange(n)) / n
    return np.searchsorted(cdf, u, side="right")


RESAMPLERS = {"multinomial": multinomial_resample, "systematic": systematic_resample}


def roughening_std(particles: np.ndarray, config: RougheningConfig) -> np.ndarray:
    """Per-dimension jitter ``K * M(m) * N**(-1/n)``, M being the spread."""
    spread = np.ptp(particles, axis=0)
    return config.tuning_k * spread * particles.shape[0] ** (-1.0 / config.state_dim)


def roughen(particles: np.ndarray, config: RougheningConfig, rng: np.random.Generator) -> np.ndarray:
    std = roughening_std(particles, config)
    return particles + rng.standard_normal(particles.shape) * std


def bpf_init(mean, cov, n: int, obs0: RangeObservation, seed=None,
             noise: NoiseConfig | None = None, measure_fn=measure) -> ParticleSet:
    """Sample the prior and weight each particle by the first range."""
    if n < 2:
        raise ValueError("need at least two particles")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    particles = mvn_draws(mean, cov, n, rng)
    var = noise.measurement_var if noise is not None else obs0.variance
    w = _normalized_from_log(gaussian_loglik(obs0.value, measure_fn(particles), var))
    return ParticleSet(particles, w, rng, likelihoods=w.copy(), updated_weights=w.copy())


def bpf_step(ps: ParticleSet, obs: RangeObservation, noise: NoiseConfig,
             rough: RougheningConfig = RougheningConfig(),
             transition: Transition | None = None, epoch: float = 0.0, dt: float = 0.0,
             resampling: str = "multinomial", measure_fn=measure):
    """Propagate, weight, resample and roughen.

    Likelihoods are handled in log space with max-subtraction so that
    km-scale innovations against a 1 m^2 variance do not underflow.
    Returns ``(particle_set, estimate)``; the estimate is the plain mean of
    the roughened, equally weighted particles.
    """
    x = ps.particles
    if transition is not None:
        x = transition(x, epoch, dt)
    n = x.shape[0]
    loglik = gaussian_loglik(obs.value, np.asarray(measure_fn(x), dtype=float), noise.measurement_var)
    q = _normalized_from_log(loglik)
    with np.errstate(divide="ignore"):
        w = _normalized_from_log(np.log(ps.weights) + loglik)

    idx = RESAMPLERS[resampling](q, n, ps.rng)
    resampled = x[idx]
    roughened = roughen(resampled, rough, ps.rng)
    new = ParticleSet(roughened, np.full(n, 1.0 / n), ps.rng, likelihoods=q, updated_weights=w)
    return new, offset_mean(roughened)
