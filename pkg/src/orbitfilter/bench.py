"""Benchmark harness: every selected filter over every scenario, with RMSE
and Henze-Zirkler tables plus per-run residual series written as CSV.

Run configuration is a YAML file::

    config_version: 1
    seed: 7
    filters: [LS, EKF, UKF, EnKF, BPF]
    noise: {process_diag: [1e-3, 1e-3, 1e-3, 1e-6, 1e-6, 1e-6], measurement_var: 1.0}
    p0_diag: [10, 10, 10, 0.1, 0.1, 0.1]
    particle_count: 10
    ensemble_count: 10
    roughening_k: 0.1
    force_model: {j2: 1.08263e-3, enable_sun: true}   # any ForceModelConfig field
    scenario_defaults: {duration_s: 3600, cadence_s: 24}
    scenarios:
      - {name: geo_83, satellite_kind: GEO, geo_longitude_deg: 83, seed: 1}
      - {name: measured, state_file: day1.csv}      # relative to the config file
"""
from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .dynamics import ForceModelConfig
from .estimators import (
    FILTER_NAMES,
    DEFAULT_P0_DIAG,
    NoiseConfig,
    make_filter,
    run_filter,
)
from .estimators.particle import RESAMPLERS
from .scenario import ScenarioConfig, TruthDataset, generate_truth, load_state_file
from .stats import hz_test, radial_residuals, residual_matrix, rmse

log = logging.getLogger(__name__)

CONFIG_VERSION = 1
HZ_FILTERS = ("EKF", "UKF", "EnKF")


class ConfigError(ValueError):
    pass


class BenchmarkError(RuntimeError):
    pass


@dataclass
class ScenarioEntry:
    config: ScenarioConfig
    state_file: Path | None = None


@dataclass
class RunConfig:
    scenarios: list[ScenarioEntry]
    filters: tuple[str, ...] = FILTER_NAMES
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    p0_diag: tuple[float, ...] = DEFAULT_P0_DIAG
    particle_count: int = 10
    ensemble_count: int = 10
    roughening_k: float = 0.1
    resampling: str = "multinomial"
    force_model: ForceModelConfig = field(default_factory=ForceModelConfig)
    output_dir: Path = Path("bench_out")
    seed: int = 0

    def __post_init__(self):
        if not self.scenarios:
            raise ConfigError("at least one scenario is required")
        if not self.filters:
            raise ConfigError("at least one filter is required")
        unknown = [f for f in self.filters if f not in FILTER_NAMES]
        if unknown:
            raise ConfigError(f"unknown filters {unknown}; choose from {list(FILTER_NAMES)}")
        if len(set(self.filters)) != len(self.filters):
            raise ConfigError("filters listed twice")
        names = [s.config.name for s in self.scenarios]
        if len(set(names)) != len(names):
            raise ConfigError("scenario names must be unique")
        if self.particle_count < 2 or self.ensemble_count < 2:
            raise ConfigError("particle and ensemble counts must be at least 2")
        if len(self.p0_diag) != 6 or min(self.p0_diag) <= 0:
            raise ConfigError("p0_diag needs 6 positive entries")
        if self.roughening_k < 0:
            raise ConfigError("roughening_k must be non-negative")
        if self.resampling not in RESAMPLERS:
            raise ConfigError(f"resampling must be one of {sorted(RESAMPLERS)}")

    def canonical(self) -> dict:
        """Plain-data view used for hashing (output location excluded)."""
        return {
            "config_version": CONFIG_VERSION,
            "seed": self.seed,
            "filters": list(self.filters),
            "noise": {"process_diag": list(self.noise.process_diag),
                      "measurement_var": self.noise.measurement_var},
            "p0_diag": list(self.p0_diag),
            "particle_count": self.particle_count,
            "ensemble_count": self.ensemble_count,
            "roughening_k": self.roughening_k,
            "resampling": self.resampling,
            "force_model": dataclasses.asdict(self.force_model),
            "scenarios": [
                {**dataclasses.asdict(s.config),
                 "state_file": _file_digest(s.state_file) if s.state_file else None}
                for s in self.scenarios
            ],
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _file_digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _build(cls, data: dict, what: str):
    names = {f.name for f in dataclasses.fields(cls)}
    extra = set(data) - names
    if extra:
        raise ConfigError(f"unknown {what} keys: {sorted(extra)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {what}: {exc}") from None


def parse_run_config(data: dict, base_dir: Path = Path(".")) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    data = dict(data)
    version = data.pop("config_version", None)
    if version != CONFIG_VERSION:
        raise ConfigError(f"config_version must be {CONFIG_VERSION}, got {version!r}")
    defaults = data.pop("scenario_defaults", {}) or {}
    raw_scenarios = data.pop("scenarios", None)
    if not isinstance(raw_scenarios, list):
        raise ConfigError("'scenarios' must be a list")
    scenarios = []
    for i, raw in enumerate(raw_scenarios):
        if not isinstance(raw, dict):
            raise ConfigError(f"scenario #{i} must be a mapping")
        merged = {**defaults, **raw}
        state_file = merged.pop("state_file", None)
        if state_file and not (base_dir / state_file).is_file():
            raise ConfigError(f"scenario #{i}: state file {base_dir / state_file} not found")
        merged.setdefault("name", f"scenario{i}")
        merged.setdefault("seed", i)
        scenarios.append(ScenarioEntry(
            _build(ScenarioConfig, merged, f"scenario #{i}"),
            (base_dir / state_file) if state_file else None,
        ))

    kwargs = {"scenarios": scenarios}
    if "noise" in data:
        kwargs["noise"] = _build(NoiseConfig, data.pop("noise") or {}, "noise")
    if "force_model" in data:
        kwargs["force_model"] = _build(ForceModelConfig, data.pop("force_model") or {}, "force_model")
    if "filters" in data:
        kwargs["filters"] = tuple(data.pop("filters") or ())
    if "p0_diag" in data:
        kwargs["p0_diag"] = tuple(float(v) for v in data.pop("p0_diag"))
    if "output_dir" in data:
        kwargs["output_dir"] = base_dir / data.pop("output_dir")
    for key in ("particle_count", "ensemble_count", "seed"):
        if key in data:
            kwargs[key] = int(data.pop(key))
    if "roughening_k" in data:
        kwargs["roughening_k"] = float(data.pop("roughening_k"))
    if "resampling" in data:
        kwargs["resampling"] = str(data.pop("resampling"))
    if data:
        raise ConfigError(f"unknown config keys: {sorted(data)}")
    return RunConfig(**kwargs)


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_run_config(data, path.parent)


def derive_seed(*keys: int) -> int:
    """Stable 63-bit seed from integer keys."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(2, np.uint64)[0] >> 1)


def stream_digest(epochs, ranges) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(epochs, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(ranges, dtype="<f8").tobytes())
    return h.hexdigest()


def prepare_truth(entry: ScenarioEntry, run_seed: int, force_model: ForceModelConfig) -> TruthDataset:
    sc = entry.config
    if entry.state_file is not None:
        ds = load_state_file(entry.state_file)
        ds.meta = sc
        return ds
    seeded = dataclasses.replace(sc, seed=derive_seed(run_seed, sc.seed, 0))
    ds = generate_truth(seeded, force_model)
    ds.meta = sc
    return ds


@dataclass
class CellResult:
    scenario: str
    filter: str
    epochs: np.ndarray
    estimates: np.ndarray
    stream_sha256: str
    radial_rmse: float
    residuals_rsw: np.ndarray
    residuals_eci: np.ndarray
    seed: int


def run_cell(name: str, filter_name: str, truth: TruthDataset, cfg: RunConfig) -> CellResult:
    sc = truth.meta
    seed = derive_seed(cfg.seed, sc.seed, 1 + FILTER_NAMES.index(filter_name))
    filt = make_filter(
        filter_name, truth.initial_estimate(sc.init_perturbation), np.diag(cfg.p0_diag),
        cfg.noise, sc.force_model(cfg.force_model), seed=seed,
        particle_count=cfg.particle_count, ensemble_count=cfg.ensemble_count,
        roughening_k=cfg.roughening_k,
    )
    if filter_name == "BPF":
        filt.resampling = cfg.resampling
    out = run_filter(filt, truth.epochs, truth.ranges, cfg.noise.measurement_var)
    series = radial_residuals(out.states, truth.states, truth.epochs)
    return CellResult(
        name, filter_name, truth.epochs, out.states, stream_digest(truth.epochs, truth.ranges),
        rmse(series.radial), series.residuals_rsw, residual_matrix(out.states, truth.states), seed,
    )


def _run_cell_job(args):
    return run_cell(*args)


@dataclass
class RmseReport:
    rows: list[tuple[str, str, float]]
    hz_rows: list[tuple[str, str, float, float]]
    metadata: dict
    cells: list[CellResult] = field(repr=False, default_factory=list)

    def rmse_of(self, scenario: str, filter_name: str) -> float:
        for s, f, v in self.rows:
            if s == scenario and f == filter_name:
                return v
        raise KeyError((scenario, filter_name))


def _fmt(v) -> str:
    return format(float(v), ".15g")


def execute(cfg: RunConfig, jobs: int = 1) -> RmseReport:
    """Run every (scenario, filter) cell and assemble the report in memory."""
    truths = {}
    for entry in cfg.scenarios:
        log.info("preparing truth for %s", entry.config.name)
        try:
            truths[entry.config.name] = prepare_truth(entry, cfg.seed, cfg.force_model)
        except (OSError, ValueError, RuntimeError) as exc:
            raise BenchmarkError(f"scenario {entry.config.name}: {exc}") from exc
    tasks = [(name, f, truths[name], cfg) for name in truths for f in cfg.filters]
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                cells = list(pool.map(_run_cell_job, tasks))
        else:
            cells = [run_cell(*t) for t in tasks]
    except Exception as exc:
        raise BenchmarkError(f"filter run failed: {type(exc).__name__}: {exc}") from exc

    streams = {}
    for c in cells:
        expected = stream_digest(truths[c.scenario].epochs, truths[c.scenario].ranges)
        if c.stream_sha256 != expected:
            raise BenchmarkError(f"{c.scenario}/{c.filter} consumed a different observation stream")
        streams[c.scenario] = expected

    rows = [(c.scenario, c.filter, c.radial_rmse) for c in cells]
    hz_rows = []
    for c in cells:
        if c.filter in HZ_FILTERS:
            res = hz_test(c.residuals_eci)
            hz_rows.append((c.scenario, c.filter, res.statistic, res.p_value))

    metadata = {
        "config_version": CONFIG_VERSION,
        "config_sha256": cfg.config_hash(),
        "run_seed": cfg.seed,
        "scenarios": {
            entry.config.name: {
                "kind": entry.config.satellite_kind,
                "scenario_seed": entry.config.seed,
                "observation_seed": None if entry.state_file else derive_seed(cfg.seed, entry.config.seed, 0),
                "epochs": int(len(truths[entry.config.name])),
                "observation_sha256": streams[entry.config.name],
            }
            for entry in cfg.scenarios
        },
        "cells": [
            {"scenario": c.scenario, "filter": c.filter, "seed": c.seed,
             "observation_sha256": c.stream_sha256}
            for c in cells
        ],
    }
    return RmseReport(rows, hz_rows, metadata, cells)


def render_outputs(report: RmseReport, filters) -> dict[str, str]:
    """File name -> text content for every output of a run."""
    files = {}
    buf = io.StringIO()
    buf.write("scenario,filter,radial_rmse_m\n")
    for s, f, v in report.rows:
        buf.write(f"{s},{f},{_fmt(v)}\n")
    files["rmse.csv"] = buf.getvalue()

    hz_cols = [f for f in filters if f in HZ_FILTERS]
    if hz_cols:
        table: dict[str, dict[str, tuple[float, float]]] = {}
        for s, f, ts, p in report.hz_rows:
            table.setdefault(s, {})[f] = (ts, p)
        buf = io.StringIO()
        buf.write(",".join(["scenario"] + [f"{f}_{k}" for f in hz_cols for k in ("ts", "p")]) + "\n")
        for s, vals in table.items():
            cells = [s] + [_fmt(x) for f in hz_cols for x in vals[f]]
            buf.write(",".join(cells) + "\n")
        files["hz.csv"] = buf.getvalue()

    for c in report.cells:
        buf = io.StringIO()
        buf.write("epoch_s,radial_m,along_m,cross_m\n")
        for t, r in zip(c.epochs, c.residuals_rsw):
            buf.write(",".join(_fmt(v) for v in (t, *r)) + "\n")
        files[f"{c.scenario}__{c.filter}__residuals.csv"] = buf.getvalue()

        buf = io.StringIO()
        buf.write("epoch_s,dx_m,dy_m,dz_m,dvx_mps,dvy_mps,dvz_mps\n")
        for t, r in zip(c.epochs, c.residuals_eci):
            buf.write(",".join(_fmt(v) for v in (t, *r)) + "\n")
        files[f"{c.scenario}__{c.filter}__eci_residuals.csv"] = buf.getvalue()

    files["metadata.json"] = json.dumps(report.metadata, indent=2, sort_keys=True) + "\n"
    return files


def write_outputs(files: dict[str, str], out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        for name, text in files.items():
            path = out_dir / name
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            written.append(path)
    except OSError:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    return written


def run_benchmark(cfg: RunConfig, jobs: int = 1, out_dir=None) -> RmseReport:
    out = Path(out_dir) if out_dir is not None else cfg.output_dir
    report = execute(cfg, jobs)
    try:
        write_outputs(render_outputs(report, cfg.filters), out)
    except OSError as exc:
        raise BenchmarkError(f"cannot write outputs to {out}: {exc}") from exc
    log.info("wrote %d RMSE rows to %s", len(report.rows), out)
    return report


def configure_logging():
    level = os.environ.get("ORBITFILTER_LOG", "WARNING").upper()
    logging.basicConfig(
        level=int(level) if level.isdigit() else getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
