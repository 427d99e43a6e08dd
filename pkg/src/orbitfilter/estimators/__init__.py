"""Orbit-determination estimators: LS, EKF, UKF, EnKF and the bootstrap
particle filter, as pure step functions plus sequential wrappers."""
from .common import (
    DEFAULT_P0_DIAG,
    DEFAULT_Q_DIAG,
    DEFAULT_R,
    EstimationError,
    FilterOutput,
    NoiseConfig,
    dynamics_transition,
    identity_transition,
    mvn_draws,
    psd_sqrt,
)
from .ekf import ekf_step
from .enkf import GAMMA, Ensemble, enkf_init, enkf_step
from .least_squares import ls_step
from .particle import (
    ParticleSet,
    RougheningConfig,
    bpf_init,
    bpf_step,
    effective_sample_size,
    multinomial_resample,
    roughen,
    roughening_std,
    systematic_resample,
)
from .sequential import FILTER_NAMES, make_filter, run_filter
from .ukf import SigmaPointSet, generate_sigma_points, ukf_step, ukf_weights, unscented_mean
