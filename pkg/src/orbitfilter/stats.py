"""Residual analytics: RSW residual series, radial RMSE and the
Henze-Zirkler multivariate normality test."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .frames import eci_to_rsw

SINGULAR_CONDITION = 1e12


@dataclass
class RadialResidualSeries:
    epochs: np.ndarray
    residuals_rsw: np.ndarray  # (m, 3): radial, along-track, cross-track

    def __post_init__(self):
        self.epochs = np.asarray(self.epochs, dtype=float)
        self.residuals_rsw = np.asarray(self.residuals_rsw, dtype=float)
        if self.residuals_rsw.shape != (self.epochs.size, 3):
            raise ValueError("one RSW residual per epoch required")
        if np.any(np.diff(self.epochs) <= 0):
            raise ValueError("epochs must be strictly increasing")

    @property
    def radial(self) -> np.ndarray:
        return self.residuals_rsw[:, 0]

    @property
    def along_track(self) -> np.ndarray:
        return self.residuals_rsw[:, 1]

    @property
    def cross_track(self) -> np.ndarray:
        return self.residuals_rsw[:, 2]


def _check_grids(predicted, actual):
    if predicted.shape != actual.shape:
        raise ValueError(f"trajectory shapes differ: {predicted.shape} vs {actual.shape}")


def radial_residuals(predicted, actual, epochs=None) -> RadialResidualSeries:
    """Predicted-minus-actual positions expressed in the actual RSW frame.

    ``predicted`` and ``actual`` are ``(m, 6)`` state arrays on the same
    epoch grid (``epochs`` defaults to ``0..m-1``).
    """
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    _check_grids(predicted, actual)
    if epochs is None:
        epochs = np.arange(actual.shape[0], dtype=float)
    rsw = eci_to_rsw(actual, predicted[:, :3] - actual[:, :3])
    return RadialResidualSeries(epochs, rsw)


def residual_matrix(predicted, actual) -> np.ndarray:
    """Per-epoch 6-vector ECI residual (m and m/s), predicted minus actual."""
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    _check_grids(predicted, actual)
    return predicted - actual


def rmse(series) -> float:
    e = np.asarray(series, dtype=float)
    if e.size == 0:
        raise ValueError("rmse of an empty series")
    scale = float(np.max(np.abs(e)))
    if scale == 0.0 or not math.isfinite(scale):
        return scale
    # scaled to dodge under/overflow of the squares
    return scale * math.sqrt(float(np.mean((e / scale) ** 2)))


def hz_beta(m: int, n: int) -> float:
    """Optimal smoothing parameter for sample size ``m`` in dimension ``n``."""
    return (1.0 / math.sqrt(2.0)) * (m * (2.0 * n + 1.0) / 4.0) ** (1.0 / (n + 4.0))


@dataclass(frozen=True)
class HzResult:
    statistic: float
    d_stat: float
    beta: float
    p_value: float
    sample_size: int
    dimension: int
    singular_covariance: bool

    def rejects(self, level: float = 0.05) -> bool:
        return self.p_value < level


def hz_null_moments(beta: float, n: int) -> tuple[float, float]:
    """Mean and variance of the HZ statistic under multivariate normality."""
    b2 = beta * beta
    a = 1.0 + 2.0 * b2
    wb = (1.0 + b2) * (1.0 + 3.0 * b2)
    mean = 1.0 - a ** (-n / 2) * (1.0 + n * b2 / a + n * (n + 2) * b2**2 / (2.0 * a**2))
    var = (
        2.0 * (1.0 + 4.0 * b2) ** (-n / 2)
        + 2.0 * a ** (-n) * (1.0 + 2.0 * n * b2**2 / a**2 + 3.0 * n * (n + 2) * b2**4 / (4.0 * a**4))
        - 4.0 * wb ** (-n / 2) * (1.0 + 3.0 * n * b2**2 / (2.0 * wb) + n * (n + 2) * b2**4 / (2.0 * wb**2))
    )
    return mean, var


def hz_pvalue(statistic: float, beta: float, n: int) -> float:
    """Upper-tail p-value from the lognormal approximation of the null."""
    mean, var = hz_null_moments(beta, n)
    log_mu = math.log(math.sqrt(mean**4 / (var + mean**2)))
    log_sigma = math.sqrt(math.log((var + mean**2) / mean**2))
    return float(sps.lognorm.sf(statistic, s=log_sigma, scale=math.exp(log_mu)))


def _is_singular(cov: np.ndarray) -> bool:
    # Condition number of the correlation matrix: insensitive to the
    # m vs m/s column scaling of state residuals.
    sd = np.sqrt(np.diag(cov))
    if np.any(sd == 0) or not np.all(np.isfinite(sd)):
        return True
    corr = cov / np.outer(sd, sd)
    return np.linalg.cond(corr) > SINGULAR_CONDITION


def hz_test(samples) -> HzResult:
    """Henze-Zirkler test of multivariate normality on ``(m, n)`` samples."""
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2:
        raise ValueError("samples must be an (m, n) matrix")
    m, n = x.shape
    if m <= n:
        raise ValueError(f"need more samples than dimensions (m={m}, n={n})")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples contain non-finite values")
    beta = hz_beta(m, n)
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / m
    if _is_singular(cov):
        return HzResult(4.0 * m, 4.0, beta, 0.0, m, n, True)

    # whiten with the Cholesky factor: ||L^-1 d||^2 = d' S^-1 d
    chol = np.linalg.cholesky(cov)
    z = np.linalg.solve(chol, centered.T).T
    gram = z @ z.T
    d_self = np.diag(gram)
    d_pair = np.clip(d_self[:, None] + d_self[None, :] - 2.0 * gram, 0.0, None)

    b2 = beta * beta
    d_stat = (
        np.exp(-0.5 * b2 * d_pair).sum() / m**2
        + (1.0 + 2.0 * b2) ** (-n / 2)
        - 2.0 * (1.0 + b2) ** (-n / 2) / m * np.exp(-b2 / (2.0 * (1.0 + b2)) * d_self).sum()
    )
    statistic = m * d_stat
    return HzResult(float(statistic), float(d_stat), beta, hz_pvalue(statistic, beta, n), m, n, False)
