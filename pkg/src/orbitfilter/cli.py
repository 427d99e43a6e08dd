"""Command line entry point: ``orbitfilter run|gen-scenario|hz``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from .bench import BenchmarkError, ConfigError, configure_logging, load_run_config, run_benchmark
from .scenario import ScenarioConfig, generate_truth, write_state_file
from .stats import hz_test

log = logging.getLogger("orbitfilter")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _cmd_run(args) -> int:
    try:
        cfg = load_run_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.jobs < 1:
        print("config error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = run_benchmark(cfg, jobs=args.jobs, out_dir=args.out)
    except BenchmarkError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for scenario, filt, value in report.rows:
        print(f"{scenario:<16} {filt:<5} {value:12.4f} m")
    return EXIT_OK


def _cmd_gen_scenario(args) -> int:
    kind = args.kind.upper()
    try:
        slot = {"geo_longitude_deg": args.slot} if kind == "GEO" else {"gso_crossing_deg": args.slot}
        config = ScenarioConfig(name=f"{kind.lower()}_{args.slot:g}", satellite_kind=kind,
                                duration_s=args.duration, cadence_s=args.cadence,
                                seed=args.seed, **slot)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        write_state_file(generate_truth(config), args.out)
    except (OSError, RuntimeError) as exc:
        print(f"generation failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def read_residual_csv(path) -> np.ndarray:
    """Numeric columns of a residual CSV, minus any ``epoch_s`` column."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: no data rows")
    header = [h.strip() for h in rows[0]]
    keep = [i for i, h in enumerate(header) if h != "epoch_s"]
    data = np.array([[float(r[i]) for i in keep] for r in rows[1:] if r], dtype=float)
    return data


def _cmd_hz(args) -> int:
    try:
        samples = read_residual_csv(args.input)
    except (OSError, ValueError, IndexError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        res = hz_test(samples)
    except ValueError as exc:
        print(f"hz failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"m={res.sample_size} n={res.dimension} beta={res.beta:.6f}")
    print(f"TS={res.statistic:.6g} p={res.p_value:.6g}"
          + (" (singular covariance)" if res.singular_covariance else ""))
    print("normality rejected at 5%" if res.rejects(0.05) else "normality not rejected at 5%")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orbitfilter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the estimator benchmark")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
    run.set_defaults(func=_cmd_run)

    gen = sub.add_parser("gen-scenario", help="write a synthetic truth/range state file")
    gen.add_argument("--kind", required=True, choices=["geo", "gso", "GEO", "GSO"])
    gen.add_argument("--slot", required=True, type=float,
                     help="GEO longitude or GSO equator-crossing longitude, degrees")
    gen.add_argument("--out", required=True, type=Path)
    gen.add_argument("--duration", type=float, default=3600.0)
    gen.add_argument("--cadence", type=float, default=24.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.set_defaults(func=_cmd_gen_scenario)

    hz = sub.add_parser("hz", help="Henze-Zirkler normality test on a residual CSV")
    hz.add_argument("--input", required=True, type=Path)
    hz.set_defaults(func=_cmd_hz)
    return parser


def main(argv=None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
