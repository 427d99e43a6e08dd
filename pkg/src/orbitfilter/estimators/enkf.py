"""Ensemble Kalman filter with multiplicative inflation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dynamics import RangeObservation, measure
from .common import EstimationError, NoiseConfig, Transition, mvn_draws, offset_mean, symmetrize

GAMMA = 0.95
ENSEMBLE_SIZE = 10


@dataclass
class Ensemble:
    members: np.ndarray  # (N, 6)
    inflation_gamma: float = GAMMA

    def __post_init__(self):
        self.members = np.asarray(self.members, dtype=float)
        if self.members.ndim != 2 or self.members.shape[0] < 2:
            raise ValueError("an ensemble needs at least two members")
        if not 0.0 < self.inflation_gamma <= 2.0:
            raise ValueError("inflation gamma must lie in (0, 2]")

    @property
    def size(self) -> int:
        return self.members.shape[0]

    def mean(self) -> np.ndarray:
        return offset_mean(self.members)

    def covariance(self) -> np.ndarray:
        dev = self.members - self.mean()
        return dev.T @ dev / (self.size - 1)


def enkf_init(mean, cov, n: int = ENSEMBLE_SIZE, seed=None,
              gamma: float = GAMMA) -> Ensemble:
    """Draw ``n`` members from ``N(mean, cov)`` with a seeded generator."""
    if n < 2:
        raise ValueError("ensemble size must be at least 2")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return Ensemble(mvn_draws(mean, cov, n, rng), gamma)


def enkf_step(ens: Ensemble, obs: RangeObservation, noise: NoiseConfig,
              transition: Transition | None = None, epoch: float = 0.0, dt: float = 0.0,
              measure_fn=measure):
    """Propagate, inflate and update every member with the shared gain.

    Deviations about the ensemble mean are scaled by ``sqrt(gamma)`` so the
    sample covariance is ``gamma`` times the propagated one. Every member
    moves by the common gain times its own innovation (no perturbed
    observations). Returns ``(ensemble, mean, covariance)``.
    """
    x = ens.members
    if transition is not None:
        x = transition(x, epoch, dt)
    n = x.shape[0]
    x_bar = offset_mean(x)
    x = x_bar + np.sqrt(ens.inflation_gamma) * (x - x_bar)
    dx = x - x_bar

    y = np.asarray(measure_fn(x), dtype=float)
    y_bar = float(offset_mean(y))
    dy = y - y_bar
    p_xx = dx.T @ dx / (n - 1)
    p_xy = dx.T @ dy / (n - 1)
    p_yy = float(dy @ dy) / (n - 1) + noise.measurement_var
    if not p_yy > 0:
        raise EstimationError(f"non-positive innovation variance {p_yy}")
    gain = p_xy / p_yy

    members = x + np.outer(obs.value - y, gain)
    state = x_bar + gain * (obs.value - y_bar)
    cov = p_xx - np.outer(gain, gain) * p_yy
    return Ensemble(members, ens.inflation_gamma), state, symmetrize(cov)
