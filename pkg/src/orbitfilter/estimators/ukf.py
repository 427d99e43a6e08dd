"""Unscented Kalman filter (non-augmented, additive noise)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dynamics import RangeObservation, measure
from .common import EstimationError, NoiseConfig, Transition, psd_sqrt, symmetrize

ALPHA = 1e-3
BETA = 2.0
KAPPA = 0.0


def ukf_weights(L: int = 6, alpha: float = ALPHA, beta_prior: float = BETA, kappa: float = KAPPA):
    """Scaled unscented-transform weights.

    Returns ``(lam, w_mean, w_cov)`` with ``2L + 1`` entries per weight
    vector. Only the central weights differ between mean and covariance.
    """
    if L < 1:
        raise ValueError("L must be at least 1")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    lam = alpha**2 * (L + kappa) - L
    if L + lam == 0:
        raise ValueError("L + lambda vanishes; pick a different kappa")
    w_mean = np.full(2 * L + 1, 1.0 / (2.0 * (L + lam)))
    w_cov = w_mean.copy()
    w_mean[0] = lam / (L + lam)
    w_cov[0] = lam / (L + lam) + (1.0 - alpha**2 + beta_prior)
    return lam, w_mean, w_cov


@dataclass
class SigmaPointSet:
    points: np.ndarray  # (2L+1, L), row 0 is the mean
    w_mean: np.ndarray
    w_cov: np.ndarray
    lam: float
    alpha: float = ALPHA
    beta_prior: float = BETA
    kappa: float = KAPPA

    @property
    def L(self) -> int:
        return self.points.shape[1]

    def mean(self) -> np.ndarray:
        return unscented_mean(self.points, self.w_mean)


def generate_sigma_points(mean, cov, lam: float | None = None, alpha: float = ALPHA,
                          beta_prior: float = BETA, kappa: float = KAPPA) -> SigmaPointSet:
    """Mean plus/minus the columns of the symmetric root of ``(L + lam) P``."""
    mean = np.asarray(mean, dtype=float)
    L = mean.shape[0]
    lam_w, w_mean, w_cov = ukf_weights(L, alpha, beta_prior, kappa)
    if lam is None:
        lam = lam_w
    elif not np.isclose(lam, lam_w, rtol=0, atol=1e-12):
        raise ValueError("lam inconsistent with alpha/kappa")
    if not L + lam > 0:
        raise ValueError("sigma points need L + lambda > 0")
    root = psd_sqrt((L + lam) * np.asarray(cov, dtype=float))
    points = np.empty((2 * L + 1, L))
    points[0] = mean
    points[1:L + 1] = mean + root.T
    points[L + 1:] = mean - root.T
    return SigmaPointSet(points, w_mean, w_cov, lam, alpha, beta_prior, kappa)


def unscented_mean(points: np.ndarray, w_mean: np.ndarray) -> np.ndarray:
    # Summing offsets from the central point avoids cancellation between
    # the large +-1e6 weights and GEO-sized coordinates.
    base = points[0]
    return base + w_mean @ (points - base)


def unscented_cov(points: np.ndarray, mean: np.ndarray, w_cov: np.ndarray,
                  other: np.ndarray | None = None, other_mean: np.ndarray | None = None) -> np.ndarray:
    dx = points - mean
    dy = dx if other is None else other - other_mean
    return (w_cov[:, None] * dx).T @ dy


def ukf_step(mean, cov, obs: RangeObservation, noise: NoiseConfig,
             transition: Transition | None = None, epoch: float = 0.0, dt: float = 0.0,
             alpha: float = ALPHA, beta_prior: float = BETA, kappa: float = KAPPA,
             measure_fn=measure):
    """Predict (when ``transition`` is given) and update with one range.

    Sigma points are drawn from ``(mean, cov)`` and pushed through the
    transition; Q is added to the predicted covariance and a fresh set is
    drawn from it for the predicted measurements. R is added to the
    innovation variance. Returns
    ``(state, covariance)``.
    """
    sigma = generate_sigma_points(mean, cov, None, alpha, beta_prior, kappa)
    pts = sigma.points
    if transition is not None:
        pts = transition(pts, epoch, dt)
    x_prior = unscented_mean(pts, sigma.w_mean)
    p_prior = unscented_cov(pts, x_prior, sigma.w_cov)
    if transition is not None:
        # redraw around (x-, P- + Q) so the gain sees the process noise too
        p_prior = symmetrize(p_prior + noise.Q)
        pts = generate_sigma_points(x_prior, p_prior, None, alpha, beta_prior, kappa).points
    y_pts = np.asarray(measure_fn(pts), dtype=float).reshape(-1, 1)
    y_prior = unscented_mean(y_pts, sigma.w_mean)
    p_yy = unscented_cov(y_pts, y_prior, sigma.w_cov) + noise.measurement_var
    p_xy = unscented_cov(pts, x_prior, sigma.w_cov, y_pts, y_prior)
    if not p_yy[0, 0] > 0:
        raise EstimationError(f"non-positive innovation variance {p_yy[0, 0]}")
    gain = p_xy / p_yy[0, 0]
    state = x_prior + gain[:, 0] * (obs.value - y_prior[0])
    cov_post = p_prior - gain @ p_yy @ gain.T
    return state, symmetrize(cov_post)
