"""Per-epoch least-squares correction of a propagated state."""
from __future__ import annotations

import numpy as np

from ..dynamics import RangeObservation, measure, measurement_jacobian
from .common import EstimationError


def ls_step(predicted, stm, obs: RangeObservation,
            measure_fn=measure, jacobian_fn=measurement_jacobian) -> np.ndarray:
    """Correct ``predicted`` with one range using ``D = H A``.

    With a single scalar observation ``D^T D`` has rank one, so the
    correction uses the Moore-Penrose inverse ``D^T / (D D^T)``: the
    minimum-norm state change that zeroes the linearised residual.
    """
    predicted = np.asarray(predicted, dtype=float)
    d = jacobian_fn(predicted) @ np.asarray(stm, dtype=float)
    ddt = float(d @ d)
    if ddt == 0.0:
        raise EstimationError("degenerate geometry: D = HA is identically zero")
    innovation = obs.value - float(measure_fn(predicted))
    return predicted + d * (innovation / ddt)
