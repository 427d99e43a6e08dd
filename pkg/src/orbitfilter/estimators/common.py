"""Shared pieces for the estimators: noise settings and covariance helpers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..dynamics import ForceModelConfig, rk4_step

# (states, epoch, dt) -> states, batched over leading axes
Transition = Callable[[np.ndarray, float, float], np.ndarray]
# states (..., 6) -> predicted measurement (...)
MeasureFn = Callable[[np.ndarray], np.ndarray]

DEFAULT_P0_DIAG = (10.0, 10.0, 10.0, 0.1, 0.1, 0.1)
DEFAULT_Q_DIAG = (1e-3, 1e-3, 1e-3, 1e-6, 1e-6, 1e-6)
DEFAULT_R = 1.0


class EstimationError(RuntimeError):
    """A filter hit a numerically broken state (non-positive innovation
    variance, total likelihood underflow, ...)."""


@dataclass(frozen=True)
class NoiseConfig:
    process_diag: tuple[float, ...] = DEFAULT_Q_DIAG
    measurement_var: float = DEFAULT_R

    def __post_init__(self):
        diag = tuple(float(q) for q in self.process_diag)
        if len(diag) != 6:
            raise ValueError("process_diag needs 6 entries")
        if min(diag) <= 0 or self.measurement_var <= 0:
            raise ValueError("noise variances must be positive")
        object.__setattr__(self, "process_diag", diag)

    @property
    def Q(self) -> np.ndarray:
        return np.diag(self.process_diag)


def dynamics_transition(config: ForceModelConfig) -> Transition:
    """RK4 transition over one filter step for the given force model."""

    def transition(states, epoch, dt):
        return rk4_step(states, epoch, dt, config)

    return transition


def identity_transition(states, epoch, dt):
    return np.array(states, dtype=float)


def symmetrize(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + p.T)


def psd_sqrt(p: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix (eigen-decomposition).

    Eigenvalues down to ``-1e-9 * trace`` are treated as roundoff and
    clipped; anything more negative is rejected.
    """
    p = symmetrize(np.asarray(p, dtype=float))
    vals, vecs = np.linalg.eigh(p)
    tol = 1e-9 * max(np.trace(np.abs(p)), np.finfo(float).tiny)
    if vals.min() < -tol:
        raise np.linalg.LinAlgError(f"matrix is not PSD (min eigenvalue {vals.min():.3e})")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def offset_mean(rows: np.ndarray) -> np.ndarray:
    """Row mean taken about the first row (exact for identical rows and
    less roundoff at GEO-sized coordinates)."""
    rows = np.asarray(rows, dtype=float)
    return rows[0] + (rows - rows[0]).mean(axis=0)


def mvn_draws(mean: np.ndarray, cov: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` multivariate-normal draws as rows, via the symmetric square root."""
    root = psd_sqrt(cov)
    z = rng.standard_normal((n, len(mean)))
    return np.asarray(mean, dtype=float) + z @ root.T


@dataclass
class FilterOutput:
    """Per-epoch estimates of one filter run."""

    epochs: np.ndarray
    states: np.ndarray
    covariances: np.ndarray | None = None
    diagnostics: dict[str, np.ndarray] = field(default_factory=dict)
