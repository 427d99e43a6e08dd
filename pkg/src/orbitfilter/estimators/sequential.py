"""One sequential interface over the five estimators.

Every filter is started at the first epoch with the first range (update
only, no propagation) and then stepped epoch by epoch, emitting one state
per epoch. The output grid is therefore identical across filters.
"""
from __future__ import annotations

import logging

import numpy as np

from ..dynamics import ForceModelConfig, RangeObservation, state_transition_matrix
from .common import FilterOutput, NoiseConfig, Transition, dynamics_transition
from .ekf import ekf_step
from .enkf import ENSEMBLE_SIZE, GAMMA, enkf_init, enkf_step
from .least_squares import ls_step
from .particle import PARTICLE_COUNT, RougheningConfig, bpf_init, bpf_step, effective_sample_size
from .ukf import ALPHA, BETA, KAPPA, ukf_step

log = logging.getLogger(__name__)

FILTER_NAMES = ("LS", "EKF", "UKF", "EnKF", "BPF")


class SequentialFilter:
    name = "base"

    def __init__(self, x0, p0, noise: NoiseConfig | None = None,
                 force_config: ForceModelConfig | None = None,
                 transition: Transition | None = None):
        self.x0 = np.asarray(x0, dtype=float)
        self.p0 = np.asarray(p0, dtype=float)
        self.noise = noise or NoiseConfig()
        self.force_config = force_config or ForceModelConfig()
        self.transition = transition or dynamics_transition(self.force_config)
        self.mu = self.force_config.mu_earth
        self.state: np.ndarray | None = None
        self.cov: np.ndarray | None = None
        self.epoch: float | None = None

    def start(self, epoch: float, obs: RangeObservation) -> np.ndarray:
        raise NotImplementedError

    def step(self, epoch: float, obs: RangeObservation) -> np.ndarray:
        raise NotImplementedError

    def diagnostics(self) -> dict[str, float]:
        return {}


class LeastSquaresFilter(SequentialFilter):
    name = "LS"

    def start(self, epoch, obs):
        self.epoch = epoch
        self.state = ls_step(self.x0, np.eye(6), obs)
        return self.state

    def step(self, epoch, obs):
        dt = epoch - self.epoch
        stm = state_transition_matrix(self.state, dt, self.mu)
        predicted = self.transition(self.state, self.epoch, dt)
        self.state = ls_step(predicted, stm, obs)
        self.epoch = epoch
        return self.state


class ExtendedKalmanFilter(SequentialFilter):
    name = "EKF"

    def start(self, epoch, obs):
        self.epoch = epoch
        self.state, self.cov = ekf_step(self.x0, self.p0, np.eye(6), obs, self.noise,
                                        add_process_noise=False)
        return self.state

    def step(self, epoch, obs):
        dt = epoch - self.epoch
        stm = state_transition_matrix(self.state, dt, self.mu)
        predicted = self.transition(self.state, self.epoch, dt)
        self.state, self.cov = ekf_step(predicted, self.cov, stm, obs, self.noise)
        self.epoch = epoch
        return self.state


class UnscentedKalmanFilter(SequentialFilter):
    name = "UKF"

    def __init__(self, *args, alpha=ALPHA, beta_prior=BETA, kappa=KAPPA, **kwargs):
        super().__init__(*args, **kwargs)
        self.alpha, self.beta_prior, self.kappa = alpha, beta_prior, kappa

    def _update(self, mean, cov, obs, transition=None, dt=0.0):
        return ukf_step(mean, cov, obs, self.noise, transition, self.epoch, dt,
                        self.alpha, self.beta_prior, self.kappa)

    def start(self, epoch, obs):
        self.epoch = epoch
        self.state, self.cov = self._update(self.x0, self.p0, obs)
        return self.state

    def step(self, epoch, obs):
        dt = epoch - self.epoch
        self.state, self.cov = self._update(self.state, self.cov, obs, self.transition, dt)
        self.epoch = epoch
        return self.state


class EnsembleKalmanFilter(SequentialFilter):
    name = "EnKF"

    def __init__(self, *args, ensemble_count=ENSEMBLE_SIZE, gamma=GAMMA, seed=None, **kwargs):
        super().__init__(*args, **kwargs)
        self.ensemble_count, self.gamma = ensemble_count, gamma
        self.rng = np.random.default_rng(seed)
        self.ensemble = None

    def start(self, epoch, obs):
        self.epoch = epoch
        ens = enkf_init(self.x0, self.p0, self.ensemble_count, self.rng, self.gamma)
        self.ensemble, self.state, self.cov = enkf_step(ens, obs, self.noise)
        return self.state

    def step(self, epoch, obs):
        dt = epoch - self.epoch
        self.ensemble, self.state, self.cov = enkf_step(
            self.ensemble, obs, self.noise, self.transition, self.epoch, dt)
        self.epoch = epoch
        return self.state

    def diagnostics(self):
        return {"spread_m": float(np.sqrt(np.trace(self.ensemble.covariance()[:3, :3])))}


class BootstrapParticleFilter(SequentialFilter):
    name = "BPF"

    def __init__(self, *args, particle_count=PARTICLE_COUNT, roughening=None, seed=None,
                 resampling="multinomial", **kwargs):
        super().__init__(*args, **kwargs)
        self.particle_count = particle_count
        self.roughening = roughening or RougheningConfig()
        self.resampling = resampling
        self.rng = np.random.default_rng(seed)
        self.particles = None

    def start(self, epoch, obs):
        self.epoch = epoch
        self.particles = bpf_init(self.x0, self.p0, self.particle_count, obs, self.rng, self.noise)
        self.state = self.particles.weighted_mean()
        return self.state

    def step(self, epoch, obs):
        dt = epoch - self.epoch
        self.particles, self.state = bpf_step(
            self.particles, obs, self.noise, self.roughening, self.transition, self.epoch, dt,
            self.resampling)
        self.epoch = epoch
        return self.state

    def diagnostics(self):
        return {"n_eff": effective_sample_size(self.particles.updated_weights)}


FILTER_CLASSES = {
    cls.name: cls
    for cls in (LeastSquaresFilter, ExtendedKalmanFilter, UnscentedKalmanFilter,
                EnsembleKalmanFilter, BootstrapParticleFilter)
}


def make_filter(name: str, x0, p0, noise=None, force_config=None, *, seed=None,
                particle_count=PARTICLE_COUNT, ensemble_count=ENSEMBLE_SIZE,
                roughening_k=None, transition=None) -> SequentialFilter:
    try:
        cls = FILTER_CLASSES[name]
    except KeyError:
        raise ValueError(f"unknown filter {name!r}; choose from {', '.join(FILTER_NAMES)}") from None
    kwargs = {}
    if cls is EnsembleKalmanFilter:
        kwargs = dict(ensemble_count=ensemble_count, seed=seed)
    elif cls is BootstrapParticleFilter:
        rough = RougheningConfig() if roughening_k is None else RougheningConfig(roughening_k)
        kwargs = dict(particle_count=particle_count, roughening=rough, seed=seed)
    return cls(x0, p0, noise, force_config, transition, **kwargs)


def run_filter(filt: SequentialFilter, epochs, ranges, obs_variance: float = 1.0) -> FilterOutput:
    """Drive ``filt`` over an observation stream; one estimate per epoch."""
    epochs = np.asarray(epochs, dtype=float)
    ranges = np.asarray(ranges, dtype=float)
    if epochs.shape != ranges.shape or epochs.size == 0:
        raise ValueError("epochs and ranges must be equally long and non-empty")
    states = np.empty((epochs.size, 6))
    covs = np.full((epochs.size, 6, 6), np.nan)
    diag: dict[str, list[float]] = {}
    for k, (t, y) in enumerate(zip(epochs, ranges)):
        obs = RangeObservation(float(y), obs_variance)
        states[k] = filt.start(t, obs) if k == 0 else filt.step(t, obs)
        if filt.cov is not None:
            covs[k] = filt.cov
        for key, val in filt.diagnostics().items():
            diag.setdefault(key, []).append(val)
    log.debug("%s finished %d epochs", filt.name, epochs.size)
    has_cov = not np.isnan(covs).all()
    return FilterOutput(epochs, states, covs if has_cov else None,
                        {k: np.array(v) for k, v in diag.items()})


__all__ = [
    "FILTER_NAMES", "SequentialFilter", "LeastSquaresFilter", "ExtendedKalmanFilter",
    "UnscentedKalmanFilter", "EnsembleKalmanFilter", "BootstrapParticleFilter",
    "make_filter", "run_filter",
]
