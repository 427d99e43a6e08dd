"""Synthetic NavIC-like truth generation and the columnar state file."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dynamics import ForceModelConfig, RK4Integrator, measure
from .frames import KeplerianElements, gmst, kepler_to_cartesian, parse_epoch_label

GEO_SLOTS_DEG = (32.5, 83.0, 131.0)
GSO_CROSSINGS_DEG = (55.0, 111.75)
GEO_RADIUS = 42164169.0  # m
# Implementer default: NavIC GSO planes are inclined near 29 degrees.
GSO_INCLINATION_DEG = 29.0
DEFAULT_EPOCH_LABEL = "2020-03-01T00:00:00"
DEFAULT_PERTURBATION = (10.0, 10.0, 10.0, 0.1, 0.1, 0.1)

STATE_FILE_HEADER = ("epoch_s", "x_m", "y_m", "z_m", "vx_mps", "vy_mps", "vz_mps", "range_obs_m")


class StateFileError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    satellite_kind: str = "GEO"
    geo_longitude_deg: float = 83.0
    gso_crossing_deg: float = 55.0
    gso_inclination_deg: float = GSO_INCLINATION_DEG
    epoch_label: str = DEFAULT_EPOCH_LABEL
    duration_s: float = 3600.0
    cadence_s: float = 24.0
    truth_step_s: float = 1.0
    obs_noise_var: float = 1.0
    init_perturbation: tuple[float, ...] = DEFAULT_PERTURBATION
    seed: int = 0

    def __post_init__(self):
        kind = self.satellite_kind.upper()
        if kind not in ("GEO", "GSO"):
            raise ValueError(f"satellite_kind must be GEO or GSO, got {self.satellite_kind!r}")
        object.__setattr__(self, "satellite_kind", kind)
        object.__setattr__(self, "init_perturbation", tuple(float(v) for v in self.init_perturbation))
        if len(self.init_perturbation) != 6:
            raise ValueError("init_perturbation needs 6 entries")
        if not (self.duration_s > 0 and self.cadence_s > 0 and self.truth_step_s > 0):
            raise ValueError("duration, cadence and truth step must be positive")
        if self.truth_step_s > self.cadence_s:
            raise ValueError("truth_step_s may not exceed cadence_s")
        if self.obs_noise_var < 0:
            raise ValueError("obs_noise_var must be non-negative")
        for label, deg in (("geo_longitude_deg", self.geo_longitude_deg),
                           ("gso_crossing_deg", self.gso_crossing_deg)):
            if not (math.isfinite(deg) and -360.0 <= deg <= 360.0):
                raise ValueError(f"{label} must be a longitude in degrees, got {deg}")
        if not 0.0 <= self.gso_inclination_deg <= 180.0:
            raise ValueError("gso_inclination_deg must lie in [0, 180]")
        parse_epoch_label(self.epoch_label)

    @property
    def epoch0_jd(self) -> float:
        return parse_epoch_label(self.epoch_label)

    def force_model(self, base: ForceModelConfig | None = None) -> ForceModelConfig:
        """``base`` (full model by default) anchored at this scenario's epoch."""
        return replace(base or ForceModelConfig(), epoch0_jd=self.epoch0_jd)


@dataclass
class TruthDataset:
    epochs: np.ndarray
    states: np.ndarray
    ranges: np.ndarray
    meta: ScenarioConfig | None = None
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.epochs = np.asarray(self.epochs, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        self.ranges = np.asarray(self.ranges, dtype=float)
        n = self.epochs.shape[0]
        if self.states.shape != (n, 6) or self.ranges.shape != (n,):
            raise ValueError("epochs, states and ranges must share the epoch grid")

    def __len__(self):
        return self.epochs.shape[0]

    def initial_estimate(self, perturbation=None) -> np.ndarray:
        if perturbation is None:
            perturbation = self.meta.init_perturbation if self.meta else DEFAULT_PERTURBATION
        return self.states[0] + np.asarray(perturbation, dtype=float)


def build_initial_elements(config: ScenarioConfig) -> KeplerianElements:
    """Elements at t = 0 that put the satellite on its slot.

    GEO: circular equatorial orbit at the slot longitude. GSO: circular
    inclined orbit starting at its ascending node, which sits over the
    equator-crossing longitude.
    """
    theta0 = gmst(config.epoch0_jd)
    if config.satellite_kind == "GEO":
        phase = (math.radians(config.geo_longitude_deg) + theta0) % (2 * math.pi)
        return KeplerianElements(GEO_RADIUS, 0.0, 0.0, 0.0, 0.0, phase)
    raan = (math.radians(config.gso_crossing_deg) + theta0) % (2 * math.pi)
    return KeplerianElements(GEO_RADIUS, 0.0, math.radians(config.gso_inclination_deg), raan, 0.0, 0.0)


def longitude_deg(state, epoch: float, epoch0_jd: float) -> float:
    """East longitude of the sub-satellite point, degrees in (-180, 180]."""
    theta = gmst(epoch0_jd + epoch / 86400.0)
    lon = math.atan2(state[1], state[0]) - theta
    return math.degrees(math.atan2(math.sin(lon), math.cos(lon)))


def _epoch_grid(duration: float, cadence: float) -> np.ndarray:
    n = int(math.floor(duration / cadence + 1e-9))
    grid = [k * cadence for k in range(n + 1)]
    if duration - grid[-1] > 1e-9 * duration:
        grid.append(duration)
    return np.array(grid)


def generate_truth(config: ScenarioConfig, force_config: ForceModelConfig | None = None,
                   initial_state=None) -> TruthDataset:
    """Propagate the truth at ``truth_step_s`` and sample it at ``cadence_s``.

    Ranges are the geometric range plus Gaussian noise of variance
    ``obs_noise_var`` drawn from a generator seeded with ``config.seed``.
    """
    fm = config.force_model(force_config)
    if initial_state is None:
        initial_state = kepler_to_cartesian(build_initial_elements(config), fm.mu_earth)
    epochs = _epoch_grid(config.duration_s, config.cadence_s)
    states = np.empty((epochs.size, 6))
    states[0] = initial_state
    chain = RK4Integrator(initial_state)
    for k in range(1, epochs.size):
        t0, t1 = epochs[k - 1], epochs[k]
        n = max(1, math.ceil((t1 - t0) / config.truth_step_s - 1e-9))
        h = (t1 - t0) / n
        for j in range(n):
            chain.step(t0 + j * h, h, fm)
        states[k] = chain.x
    rng = np.random.default_rng(config.seed)
    noise = math.sqrt(config.obs_noise_var) * rng.standard_normal(epochs.size)
    ranges = measure(states) + noise
    return TruthDataset(epochs, states, ranges, config)


def _fmt(v: float) -> str:
    return format(float(v), ".15g")


def dump_state_file(dataset: TruthDataset) -> str:
    out = io.StringIO()
    out.write(",".join(STATE_FILE_HEADER) + "\n")
    for t, s, y in zip(dataset.epochs, dataset.states, dataset.ranges):
        out.write(",".join(_fmt(v) for v in (t, *s, y)) + "\n")
    return out.getvalue()


def write_state_file(dataset: TruthDataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_state_file(dataset))


def parse_state_file(text: str, source: str = "<string>") -> TruthDataset:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise StateFileError(f"{source}: empty state file")
    header = tuple(h.strip() for h in lines[0].split(","))
    if header != STATE_FILE_HEADER:
        raise StateFileError(f"{source}:1: expected header {','.join(STATE_FILE_HEADER)}")
    rows = []
    for lineno, row in enumerate(csv.reader(lines[1:]), start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(STATE_FILE_HEADER):
            raise StateFileError(f"{source}:{lineno}: expected {len(STATE_FILE_HEADER)} fields, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError as exc:
            raise StateFileError(f"{source}:{lineno}: {exc}") from None
        if not all(math.isfinite(v) for v in vals):
            raise StateFileError(f"{source}:{lineno}: non-finite value")
        if rows and vals[0] <= rows[-1][0]:
            raise StateFileError(f"{source}:{lineno}: epochs must be strictly increasing")
        rows.append(vals)
    if not rows:
        raise StateFileError(f"{source}: no data rows")
    data = np.array(rows)
    return TruthDataset(data[:, 0], data[:, 1:7], data[:, 7])


def load_state_file(path) -> TruthDataset:
    path = Path(path)
    return parse_state_file(path.read_text(encoding="utf-8"), str(path))


__all__ = [
    "GEO_SLOTS_DEG", "GSO_CROSSINGS_DEG", "GEO_RADIUS", "ScenarioConfig", "TruthDataset",
    "StateFileError", "build_initial_elements", "generate_truth", "load_state_file",
    "write_state_file", "parse_state_file", "dump_state_file", "longitude_deg",
]
