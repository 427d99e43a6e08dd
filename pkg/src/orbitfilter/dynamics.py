"""Perturbed two-body force model, RK4 propagation and the range observation.

Accelerations accept a single position ``(3,)`` or a stack ``(..., 3)`` so
that sigma points, ensemble members and particles propagate in one call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .frames import EARTH_RADIUS, JD_J2000, MU_EARTH, SECONDS_PER_DAY

AU = 1.495978707e11  # m
MU_SUN = 1.32712440018e20  # m^3/s^2
MU_MOON = 4.9028e12  # m^3/s^2
SOLAR_PRESSURE_1AU = 4.56e-6  # N/m^2

J2 = 1.08263e-3
J3 = -2.5327e-6
J4 = -1.6196e-6

# 2020-03-01T00:00:00 UTC
DEFAULT_EPOCH_JD = 2458909.5


class PropagationError(RuntimeError):
    """Raised when integration produces non-finite states."""


@dataclass(frozen=True)
class ForceModelConfig:
    mu_earth: float = MU_EARTH
    j2: float = J2
    j3: float = J3
    j4: float = J4
    earth_radius: float = EARTH_RADIUS
    enable_sun: bool = True
    enable_moon: bool = True
    enable_srp: bool = True
    srp_area_to_mass: float = 0.02  # m^2/kg
    srp_reflectivity: float = 1.5
    mu_sun: float = MU_SUN
    mu_moon: float = MU_MOON
    # absolute time of epoch t = 0, used by the ephemerides
    epoch0_jd: float = DEFAULT_EPOCH_JD

    def __post_init__(self):
        if not self.mu_earth > 0:
            raise ValueError("mu_earth must be positive")
        if not self.earth_radius > 0:
            raise ValueError("earth_radius must be positive")
        if self.srp_area_to_mass < 0:
            raise ValueError("srp_area_to_mass must be non-negative")
        if not 1.0 <= self.srp_reflectivity <= 2.0:
            raise ValueError("srp_reflectivity must lie in [1, 2]")

    @classmethod
    def two_body(cls, mu_earth: float = MU_EARTH) -> ForceModelConfig:
        return cls(
            mu_earth=mu_earth, j2=0.0, j3=0.0, j4=0.0,
            enable_sun=False, enable_moon=False, enable_srp=False,
        )

    def with_(self, **changes) -> ForceModelConfig:
        return replace(self, **changes)

    @property
    def is_two_body(self) -> bool:
        return (
            self.j2 == 0.0 and self.j3 == 0.0 and self.j4 == 0.0
            and not (self.enable_sun or self.enable_moon or self.enable_srp)
        )


@dataclass(frozen=True)
class RangeObservation:
    """Geocentric range measurement ``value`` with noise ``variance`` (m^2)."""

    value: float
    variance: float

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError(f"range must be positive, got {self.value}")
        if not self.variance > 0:
            raise ValueError(f"measurement variance must be positive, got {self.variance}")


def _norm(r: np.ndarray) -> np.ndarray:
    return np.linalg.norm(r, axis=-1, keepdims=True)


def kepler_acceleration(r: np.ndarray, mu: float = MU_EARTH) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    rn = _norm(r)
    if np.any(rn == 0):
        raise ValueError("kepler_acceleration is singular at r = 0")
    return -mu * r / rn**3


def zonal_acceleration(r: np.ndarray, config: ForceModelConfig) -> np.ndarray:
    """Acceleration from the J2, J3 and J4 zonal harmonics.

    The ECI z axis is taken as the spin axis; zonal terms only depend on
    z/r so no Earth rotation is needed.
    """
    r = np.asarray(r, dtype=float)
    x, y, z = r[..., 0], r[..., 1], r[..., 2]
    rn = np.linalg.norm(r, axis=-1)
    if np.any(rn == 0):
        raise ValueError("zonal_acceleration is singular at r = 0")
    mu, re = config.mu_earth, config.earth_radius
    s2 = (z / rn) ** 2
    acc = np.zeros_like(r)

    if config.j2:
        k = -1.5 * config.j2 * mu * re**2 / rn**5
        acc[..., 0] += k * x * (1.0 - 5.0 * s2)
        acc[..., 1] += k * y * (1.0 - 5.0 * s2)
        acc[..., 2] += k * z * (3.0 - 5.0 * s2)
    if config.j3:
        k = -2.5 * config.j3 * mu * re**3 / rn**7
        f = 3.0 * z - 7.0 * z**3 / rn**2
        acc[..., 0] += k * x * f
        acc[..., 1] += k * y * f
        acc[..., 2] += k * (6.0 * z**2 - 7.0 * z**4 / rn**2 - 0.6 * rn**2)
    if config.j4:
        k = 1.875 * config.j4 * mu * re**4 / rn**7
        f = 1.0 - 14.0 * s2 + 21.0 * s2**2
        acc[..., 0] += k * x * f
        acc[..., 1] += k * y * f
        acc[..., 2] += k * z * (5.0 - 70.0 / 3.0 * s2 + 21.0 * s2**2)
    return acc


def third_body_acceleration(r_sat: np.ndarray, r_body: np.ndarray, mu_body: float) -> np.ndarray:
    """Differential point-mass attraction of a distant body."""
    r_sat = np.asarray(r_sat, dtype=float)
    r_body = np.asarray(r_body, dtype=float)
    d = r_body - r_sat
    dn = _norm(d)
    bn = np.linalg.norm(r_body)
    if bn == 0:
        raise ValueError("third body at the origin")
    if np.any(dn == 0):
        raise ValueError("satellite coincides with the perturbing body")
    return mu_body * (d / dn**3 - r_body / bn**3)


def _centuries(epoch: float, epoch0_jd: float) -> float:
    return (epoch0_jd + epoch / SECONDS_PER_DAY - JD_J2000) / 36525.0


def _obliquity(t: float) -> float:
    return math.radians(23.439291 - 0.0130042 * t)


def sun_position(epoch: float, epoch0_jd: float = DEFAULT_EPOCH_JD) -> np.ndarray:
    """Low-precision geocentric sun vector (m), Astronomical Almanac series."""
    t = _centuries(epoch, epoch0_jd)
    mean_lon = 280.460 + 36000.771 * t
    m = math.radians(357.5291092 + 35999.05034 * t)
    lon = math.radians(mean_lon + 1.914666471 * math.sin(m) + 0.019994643 * math.sin(2 * m))
    dist = AU * (1.000140612 - 0.016708617 * math.cos(m) - 0.000139589 * math.cos(2 * m))
    eps = _obliquity(t)
    return dist * np.array(
        [math.cos(lon), math.cos(eps) * math.sin(lon), math.sin(eps) * math.sin(lon)]
    )


def moon_position(epoch: float, epoch0_jd: float = DEFAULT_EPOCH_JD) -> np.ndarray:
    """Low-precision geocentric moon vector (m), truncated almanac series."""
    t = _centuries(epoch, epoch0_jd)

    def s(deg):
        return math.sin(math.radians(deg))

    def c(deg):
        return math.cos(math.radians(deg))

    lon = (
        218.32 + 481267.8813 * t
        + 6.29 * s(134.9 + 477198.85 * t)
        - 1.27 * s(259.2 - 413335.38 * t)
        + 0.66 * s(235.7 + 890534.23 * t)
        + 0.21 * s(269.9 + 954397.70 * t)
        - 0.19 * s(357.5 + 35999.05 * t)
        - 0.11 * s(186.6 + 966404.05 * t)
    )
    lat = (
        5.13 * s(93.3 + 483202.03 * t)
        + 0.28 * s(228.2 + 960400.87 * t)
        - 0.28 * s(318.3 + 6003.18 * t)
        - 0.17 * s(217.6 - 407332.20 * t)
    )
    parallax = (
        0.9508
        + 0.0518 * c(134.9 + 477198.85 * t)
        + 0.0095 * c(259.2 - 413335.38 * t)
        + 0.0078 * c(235.7 + 890534.23 * t)
        + 0.0028 * c(269.9 + 954397.70 * t)
    )
    dist = EARTH_RADIUS / math.sin(math.radians(parallax))
    lon, lat = math.radians(lon), math.radians(lat)
    eps = _obliquity(t)
    cl, sl = math.cos(lat), math.sin(lat)
    return dist * np.array(
        [
            cl * math.cos(lon),
            math.cos(eps) * cl * math.sin(lon) - math.sin(eps) * sl,
            math.sin(eps) * cl * math.sin(lon) + math.cos(eps) * sl,
        ]
    )


def srp_acceleration(r_sat: np.ndarray, r_sun: np.ndarray, config: ForceModelConfig) -> np.ndarray:
    """Cannonball solar radiation pressure, always illuminated."""
    r_sat = np.asarray(r_sat, dtype=float)
    d = r_sat - np.asarray(r_sun, dtype=float)
    dn = _norm(d)
    if np.any(dn == 0):
        raise ValueError("satellite coincides with the sun")
    pressure = SOLAR_PRESSURE_1AU * (AU / dn) ** 2
    return pressure * config.srp_reflectivity * config.srp_area_to_mass * d / dn


def total_acceleration(state: np.ndarray, epoch: float, config: ForceModelConfig) -> np.ndarray:
    """Sum of central gravity and every enabled perturbation."""
    r = np.asarray(state, dtype=float)[..., :3]
    acc = kepler_acceleration(r, config.mu_earth)
    if config.j2 or config.j3 or config.j4:
        acc = acc + zonal_acceleration(r, config)
    if config.enable_sun or config.enable_srp:
        r_sun = sun_position(epoch, config.epoch0_jd)
        if config.enable_sun:
            acc = acc + third_body_acceleration(r, r_sun, config.mu_sun)
        if config.enable_srp and config.srp_area_to_mass > 0:
            acc = acc + srp_acceleration(r, r_sun, config)
    if config.enable_moon:
        acc = acc + third_body_acceleration(r, moon_position(epoch, config.epoch0_jd), config.mu_moon)
    return acc


def _derivative(state: np.ndarray, epoch: float, config: ForceModelConfig) -> np.ndarray:
    return np.concatenate([state[..., 3:6], total_acceleration(state, epoch, config)], axis=-1)


def _rk4_increment(x: np.ndarray, epoch: float, dt: float, config: ForceModelConfig) -> np.ndarray:
    k1 = _derivative(x, epoch, config)
    k2 = _derivative(x + 0.5 * dt * k1, epoch + 0.5 * dt, config)
    k3 = _derivative(x + 0.5 * dt * k2, epoch + 0.5 * dt, config)
    k4 = _derivative(x + dt * k3, epoch + dt, config)
    return dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step(state: np.ndarray, epoch: float, dt: float, config: ForceModelConfig) -> np.ndarray:
    """One classical Runge-Kutta 4 step of the equations of motion.

    ``state`` may be ``(6,)`` or a batch ``(..., 6)``.
    """
    if not math.isfinite(dt) or dt == 0:
        raise ValueError(f"rk4_step needs a finite non-zero dt, got {dt}")
    x = np.asarray(state, dtype=float)
    out = x + _rk4_increment(x, epoch, dt, config)
    if not np.all(np.isfinite(out)):
        raise PropagationError(f"non-finite state after RK4 step at t={epoch}")
    return out


class RK4Integrator:
    """Chain of RK4 steps with Kahan-compensated state accumulation.

    Keeps the summation roundoff at a few ulp over thousands of steps, so
    long truth arcs are limited by truncation error only.
    """

    def __init__(self, state: np.ndarray):
        self.x = np.array(state, dtype=float)
        self.carry = np.zeros_like(self.x)

    def step(self, epoch: float, dt: float, config: ForceModelConfig) -> np.ndarray:
        if not math.isfinite(dt) or dt == 0:
            raise ValueError(f"rk4 step needs a finite non-zero dt, got {dt}")
        inc = _rk4_increment(self.x + self.carry, epoch, dt, config) + self.carry
        total = self.x + inc
        self.carry = inc - (total - self.x)
        self.x = total
        if not np.all(np.isfinite(total)):
            raise PropagationError(f"non-finite state after RK4 step at t={epoch}")
        return total


def propagate_to(state: np.ndarray, t0: float, t1: float, max_step: float,
                 config: ForceModelConfig) -> np.ndarray:
    """Integrate from ``t0`` to ``t1`` with steps no longer than ``max_step``."""
    span = t1 - t0
    if span == 0:
        return np.array(state, dtype=float)
    n = max(1, math.ceil(abs(span) / max_step - 1e-9))
    h = span / n
    chain = RK4Integrator(state)
    for k in range(n):
        chain.step(t0 + k * h, h, config)
    return chain.x


def propagate(state: np.ndarray, t0: float, t_end: float, dt: float,
              config: ForceModelConfig) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-step RK4 trajectory including both endpoints.

    The last step is shortened when the span is not a multiple of ``dt``.
    Returns ``(epochs, states)`` with shapes ``(n,)`` and ``(n, 6)``.
    """
    if not t_end > t0:
        raise ValueError("propagate needs t_end > t0")
    if not dt > 0:
        raise ValueError("propagate needs dt > 0")
    n_full = int(math.floor((t_end - t0) / dt + 1e-9))
    epochs = [t0 + k * dt for k in range(n_full + 1)]
    if t_end - epochs[-1] > 1e-9 * max(1.0, abs(t_end)):
        epochs.append(t_end)
    else:
        epochs[-1] = t_end
    states = np.empty((len(epochs), 6))
    states[0] = state
    chain = RK4Integrator(state)
    for k in range(1, len(epochs)):
        states[k] = chain.step(epochs[k - 1], epochs[k] - epochs[k - 1], config)
    return np.array(epochs), states


def gravity_gradient(r: np.ndarray, mu: float = MU_EARTH) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    rn = np.linalg.norm(r)
    if rn == 0:
        raise ValueError("gravity gradient is singular at r = 0")
    return -mu / rn**3 * np.eye(3) + 3.0 * mu * np.outer(r, r) / rn**5


def state_transition_matrix(state: np.ndarray, dt: float, mu: float = MU_EARTH) -> np.ndarray:
    """First-order two-body state transition matrix ``I + F dt``."""
    f = np.zeros((6, 6))
    f[:3, 3:] = np.eye(3)
    f[3:, :3] = gravity_gradient(np.asarray(state)[:3], mu)
    return np.eye(6) + f * dt


def measure(state: np.ndarray) -> np.ndarray | float:
    """Geocentric range of one state or a batch of states."""
    state = np.asarray(state, dtype=float)
    rng = np.linalg.norm(state[..., :3], axis=-1)
    return float(rng) if rng.ndim == 0 else rng


def measurement_jacobian(state: np.ndarray) -> np.ndarray:
    """Row ``d range / d state`` = ``(x/r, y/r, z/r, 0, 0, 0)``."""
    r = np.asarray(state, dtype=float)[:3]
    rn = np.linalg.norm(r)
    if rn == 0:
        raise ValueError("measurement Jacobian undefined at r = 0")
    return np.concatenate([r / rn, np.zeros(3)])
