"""Extended Kalman filter measurement/time update for a scalar range."""
from __future__ import annotations

import numpy as np

from ..dynamics import RangeObservation, measure, measurement_jacobian
from .common import EstimationError, NoiseConfig, symmetrize


def ekf_step(predicted, prev_cov, stm, obs: RangeObservation, noise: NoiseConfig,
             measure_fn=measure, jacobian_fn=measurement_jacobian,
             add_process_noise: bool = True):
    """One EKF cycle.

    ``predicted`` is the propagated mean; ``stm`` carries the previous
    covariance forward. The innovation uses the nonlinear range, the
    Jacobian only enters the gain. ``noise.measurement_var`` is the R the
    filter assumes, independent of ``obs.variance``. Returns
    ``(state, covariance)``.
    """
    predicted = np.asarray(predicted, dtype=float)
    a = np.asarray(stm, dtype=float)
    p_prior = a @ np.asarray(prev_cov, dtype=float) @ a.T
    if add_process_noise:
        p_prior = p_prior + noise.Q
    h = jacobian_fn(predicted)
    s = float(h @ p_prior @ h) + noise.measurement_var
    if not s > 0:
        raise EstimationError(f"non-positive innovation variance {s}")
    gain = p_prior @ h / s
    innovation = obs.value - float(measure_fn(predicted))
    state = predicted + gain * innovation
    cov = (np.eye(len(state)) - np.outer(gain, h)) @ p_prior
    return state, symmetrize(cov)
