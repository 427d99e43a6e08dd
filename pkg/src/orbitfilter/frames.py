"""Time helpers, Keplerian elements and the RSW (radial/along/cross) frame.

All vectors live in a single generic ECI frame. Epochs are plain floats
holding seconds since the scenario reference epoch; calendar dates only
enter through :func:`julian_date` when an absolute time is needed
(ephemerides, sidereal angle).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

MU_EARTH = 3.986004418e14  # m^3/s^2
EARTH_RADIUS = 6378137.0  # m, equatorial
EARTH_ROTATION_RATE = 7.2921159e-5  # rad/s

JD_J2000 = 2451545.0
SECONDS_PER_DAY = 86400.0


@dataclass(frozen=True)
class KeplerianElements:
    """Classical orbital elements, SI units and radians."""

    semi_major_axis: float
    eccentricity: float
    inclination: float
    raan: float
    arg_perigee: float
    true_anomaly: float

    def __post_init__(self):
        if not self.semi_major_axis > 0:
            raise ValueError(f"semi-major axis must be positive, got {self.semi_major_axis}")
        if not 0.0 <= self.eccentricity < 1.0:
            raise ValueError(f"only closed orbits supported (0 <= e < 1), got e={self.eccentricity}")
        if not 0.0 <= self.inclination <= math.pi:
            raise ValueError(f"inclination must lie in [0, pi], got {self.inclination}")


def julian_date(when: datetime) -> float:
    """Julian date of a datetime (naive values are taken as UTC)."""
    if when.tzinfo is None:
        when = when.replace(tzinfo=timezone.utc)
    j2000 = datetime(2000, 1, 1, 12, tzinfo=timezone.utc)
    return JD_J2000 + (when - j2000).total_seconds() / SECONDS_PER_DAY


def parse_epoch_label(label: str) -> float:
    """Julian date from an ISO-8601 label such as ``2020-03-01T00:00:00``."""
    return julian_date(datetime.fromisoformat(label))


def gmst(jd: float) -> float:
    """Greenwich mean sidereal angle in radians (IAU 1982 polynomial)."""
    t = (jd - JD_J2000) / 36525.0
    seconds = (
        67310.54841
        + (876600.0 * 3600.0 + 8640184.812866) * t
        + 0.093104 * t**2
        - 6.2e-6 * t**3
    )
    return math.radians((seconds / 240.0) % 360.0)


def kepler_to_cartesian(elements: KeplerianElements, mu: float = MU_EARTH) -> np.ndarray:
    """Convert Keplerian elements to an ECI state ``[x, y, z, vx, vy, vz]``."""
    a = elements.semi_major_axis
    e = elements.eccentricity
    if a <= 0 or not 0.0 <= e < 1.0:
        raise ValueError("kepler_to_cartesian needs a > 0 and 0 <= e < 1")
    nu = elements.true_anomaly
    p = a * (1.0 - e**2)
    r = p / (1.0 + e * math.cos(nu))
    # perifocal frame
    r_pf = np.array([r * math.cos(nu), r * math.sin(nu), 0.0])
    v_pf = math.sqrt(mu / p) * np.array([-math.sin(nu), e + math.cos(nu), 0.0])

    co, so = math.cos(elements.raan), math.sin(elements.raan)
    cw, sw = math.cos(elements.arg_perigee), math.sin(elements.arg_perigee)
    ci, si = math.cos(elements.inclination), math.sin(elements.inclination)
    rot = np.array(
        [
            [co * cw - so * sw * ci, -co * sw - so * cw * ci, so * si],
            [so * cw + co * sw * ci, -so * sw + co * cw * ci, -co * si],
            [sw * si, cw * si, ci],
        ]
    )
    return np.concatenate([rot @ r_pf, rot @ v_pf])


def rsw_basis(state: np.ndarray) -> np.ndarray:
    """Rows R, S, W of the radial / along-track / cross-track triad.

    Works on a single state ``(6,)`` (returns ``(3, 3)``) or a stack of
    states ``(..., 6)`` (returns ``(..., 3, 3)``).
    """
    state = np.asarray(state, dtype=float)
    r = state[..., :3]
    v = state[..., 3:6]
    r_norm = np.linalg.norm(r, axis=-1, keepdims=True)
    h = np.cross(r, v)
    h_norm = np.linalg.norm(h, axis=-1, keepdims=True)
    if np.any(r_norm == 0) or np.any(h_norm <= 1e-12 * r_norm * np.linalg.norm(v, axis=-1, keepdims=True)):
        raise ValueError("degenerate RSW frame: zero position or position parallel to velocity")
    r_hat = r / r_norm
    w_hat = h / h_norm
    s_hat = np.cross(w_hat, r_hat)
    return np.stack([r_hat, s_hat, w_hat], axis=-2)


def eci_to_rsw(reference: np.ndarray, eci_vec: np.ndarray) -> np.ndarray:
    """Express ``eci_vec`` in the RSW frame of ``reference``.

    Returns ``[radial, along_track, cross_track]``; broadcasts over leading
    dimensions like :func:`rsw_basis`.
    """
    basis = rsw_basis(reference)
    return np.einsum("...ij,...j->...i", basis, np.asarray(eci_vec, dtype=float))
