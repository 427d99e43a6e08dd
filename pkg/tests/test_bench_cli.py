import csv
import io
import json

import numpy as np
import pytest
import yaml

from orbitfilter import bench, cli
from orbitfilter.bench import (
    BenchmarkError,
    ConfigError,
    RmseReport,
    parse_run_config,
    render_outputs,
    run_benchmark,
    write_outputs,
)


def base_config(**over):
    cfg = {
        "config_version": 1,
        "seed": 7,
        "filters": ["LS", "EKF", "UKF", "EnKF", "BPF"],
        "scenario_defaults": {"duration_s": 240, "cadence_s": 24, "truth_step_s": 8},
        "scenarios": [
            {"name": "geo_83", "satellite_kind": "GEO", "geo_longitude_deg": 83, "seed": 1},
            {"name": "gso_55", "satellite_kind": "GSO", "gso_crossing_deg": 55, "seed": 2},
        ],
    }
    cfg.update(over)
    return cfg


def write_cfg(tmp_path, data, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def read_dir(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_rows_one_per_pair(tmp_path):
    report = run_benchmark(parse_run_config(base_config()), out_dir=tmp_path / "o")
    assert len(report.rows) == 10
    assert {(s, f) for s, f, _ in report.rows} == {(s, f) for s in ("geo_83", "gso_55")
                                                  for f in ("LS", "EKF", "UKF", "EnKF", "BPF")}
    assert all(v >= 0 for *_, v in report.rows)
    rows = list(csv.DictReader(io.StringIO((tmp_path / "o" / "rmse.csv").read_text())))
    for row, (_, _, v) in zip(rows, report.rows):
        assert float(row["radial_rmse_m"]) == pytest.approx(v, rel=1e-14)


def test_determinism_and_path_independence(tmp_path):
    cfg = parse_run_config(base_config())
    run_benchmark(cfg, out_dir=tmp_path / "a")
    run_benchmark(cfg, out_dir=tmp_path / "b" / "nested")
    run_benchmark(cfg, jobs=2, out_dir=tmp_path / "c")
    a = read_dir(tmp_path / "a")
    assert a == read_dir(tmp_path / "b" / "nested") == read_dir(tmp_path / "c")
    assert "scenario,filter,radial_rmse_m" in a["rmse.csv"].decode()


def test_seed_changes_observations(tmp_path):
    r1 = run_benchmark(parse_run_config(base_config(seed=1, filters=["EKF"])), out_dir=tmp_path / "1")
    r2 = run_benchmark(parse_run_config(base_config(seed=2, filters=["EKF"])), out_dir=tmp_path / "2")
    h1 = r1.metadata["scenarios"]["geo_83"]["observation_sha256"]
    h2 = r2.metadata["scenarios"]["geo_83"]["observation_sha256"]
    assert h1 != h2


def test_hz_table_columns(tmp_path):
    run_benchmark(parse_run_config(base_config(filters=["EKF"])), out_dir=tmp_path)
    header = (tmp_path / "hz.csv").read_text().splitlines()[0]
    assert header == "scenario,EKF_ts,EKF_p"
    run_benchmark(parse_run_config(base_config(filters=["LS", "BPF"])), out_dir=tmp_path / "x")
    assert not (tmp_path / "x" / "hz.csv").exists()


def test_metadata_stream_hashes(tmp_path):
    report = run_benchmark(parse_run_config(base_config()), out_dir=tmp_path)
    meta = json.loads((tmp_path / "metadata.json").read_text())
    assert meta == json.loads(json.dumps(report.metadata))
    for cell in meta["cells"]:
        assert cell["observation_sha256"] == meta["scenarios"][cell["scenario"]]["observation_sha256"]
    assert str(tmp_path) not in (tmp_path / "metadata.json").read_text()
    assert len(meta["config_sha256"]) == 64


def test_residual_csv_contract(tmp_path):
    cfg = base_config(filters=["EKF"], scenario_defaults={"duration_s": 3600, "truth_step_s": 24})
    run_benchmark(parse_run_config(cfg), out_dir=tmp_path)
    text = (tmp_path / "geo_83__EKF__residuals.csv").read_text()
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["epoch_s", "radial_m", "along_m", "cross_m"]
    assert len(rows) == 152
    assert float(rows[-1][0]) == 3600.0


def test_zero_error_run_renders_zeros():
    epochs = np.arange(5) * 24.0
    cell = bench.CellResult("s", "EKF", epochs, np.zeros((5, 6)), "h", 0.0,
                            np.zeros((5, 3)), np.zeros((5, 6)), 1)
    files = render_outputs(RmseReport([("s", "EKF", 0.0)], [], {}, [cell]), ["EKF"])
    rows = list(csv.reader(io.StringIO(files["s__EKF__residuals.csv"])))[1:]
    assert len(rows) == 5
    assert all(float(v) == 0.0 for r in rows for v in r[1:])


def test_numeric_cells_round_trip():
    x = 0.1 + 0.2
    cell = bench.CellResult("s", "LS", np.array([0.0]), np.zeros((1, 6)), "h", x,
                            np.array([[x, -x / 3, 1e-17]]), np.zeros((1, 6)), 1)
    files = render_outputs(RmseReport([("s", "LS", x)], [], {}, [cell]), ["LS"])
    row = list(csv.reader(io.StringIO(files["s__LS__residuals.csv"])))[1]
    assert float(row[1]) == pytest.approx(x, rel=1e-15)
    assert float(row[2]) == pytest.approx(-x / 3, rel=1e-15)


def test_failure_leaves_no_outputs(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise FloatingPointError("diverged")
    monkeypatch.setattr(bench, "run_cell", boom)
    out = tmp_path / "o"
    with pytest.raises(BenchmarkError):
        run_benchmark(parse_run_config(base_config()), out_dir=out)
    assert not out.exists() or not any(out.iterdir())


def test_partial_write_is_rolled_back(tmp_path):
    (tmp_path / "b.csv").mkdir()  # writing this name fails
    with pytest.raises(OSError):
        write_outputs({"a.csv": "x\n", "b.csv": "y\n"}, tmp_path)
    assert not (tmp_path / "a.csv").exists()


@pytest.mark.parametrize("change", [
    {"config_version": 2}, {"filters": ["KF"]}, {"filters": []}, {"particle_count": 1},
    {"ensemble_count": 1}, {"scenarios": []}, {"bogus": 1}, {"p0_diag": [1, 2]},
    {"resampling": "stratified"}, {"noise": {"measurement_var": -1}},
    {"scenarios": [{"name": "a", "satellite_kind": "LEO"}]},
    {"scenarios": [{"name": "a"}, {"name": "a"}]},
])
def test_config_errors(change):
    with pytest.raises(ConfigError):
        parse_run_config(base_config(**change))


def test_cli_run_and_exit_codes(tmp_path, capsys):
    path = write_cfg(tmp_path, base_config(filters=["EKF", "UKF"]))
    assert cli.main(["run", "--config", str(path), "--out", str(tmp_path / "o"), "--seed", "3"]) == 0
    assert "geo_83" in capsys.readouterr().out
    assert json.loads((tmp_path / "o" / "metadata.json").read_text())["run_seed"] == 3
    bad = write_cfg(tmp_path, base_config(config_version=9), "bad.yaml")
    assert cli.main(["run", "--config", str(bad)]) == 1
    assert cli.main(["run", "--config", str(tmp_path / "missing.yaml")]) == 1


def test_cli_runtime_failure_exit_code(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise FloatingPointError("diverged")
    monkeypatch.setattr(bench, "run_cell", boom)
    path = write_cfg(tmp_path, base_config())
    assert cli.main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2


def test_cli_gen_scenario_and_state_file_run(tmp_path):
    out = tmp_path / "day.csv"
    assert cli.main(["gen-scenario", "--kind", "gso", "--slot", "55", "--out", str(out),
                     "--duration", "240"]) == 0
    assert out.read_text().startswith("epoch_s,x_m")
    cfg = base_config(filters=["EKF", "BPF"],
                      scenarios=[{"name": "file", "satellite_kind": "GSO", "state_file": "day.csv"}])
    path = write_cfg(tmp_path, cfg)
    assert cli.main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    rows = (tmp_path / "o" / "rmse.csv").read_text().splitlines()
    assert len(rows) == 3
    assert cli.main(["gen-scenario", "--kind", "geo", "--slot", "999", "--out", str(out)]) == 1


def test_state_file_problems(tmp_path):
    cfg = base_config(scenarios=[{"name": "f", "state_file": "nope.csv"}])
    assert cli.main(["run", "--config", str(write_cfg(tmp_path, cfg))]) == 1
    (tmp_path / "bad.csv").write_text("epoch_s,x_m\n1,2\n")
    cfg = base_config(scenarios=[{"name": "f", "state_file": "bad.csv"}])
    out = tmp_path / "o"
    assert cli.main(["run", "--config", str(write_cfg(tmp_path, cfg)), "--out", str(out)]) == 2
    assert not out.exists()


def test_cli_hz(tmp_path, capsys):
    rng = np.random.default_rng(0)
    path = tmp_path / "r.csv"
    data = rng.normal(size=(150, 6))
    lines = ["epoch_s,a,b,c,d,e,f"] + [",".join(map(str, [24.0 * i, *row])) for i, row in enumerate(data)]
    path.write_text("\n".join(lines) + "\n")
    assert cli.main(["hz", "--input", str(path)]) == 0
    out = capsys.readouterr().out
    assert "m=150 n=6" in out and "TS=" in out
    assert cli.main(["hz", "--input", str(tmp_path / "none.csv")]) == 1


def test_log_env(monkeypatch):
    import logging
    monkeypatch.setenv("ORBITFILTER_LOG", "debug")
    root = logging.getLogger()
    old = root.handlers[:], root.level
    root.handlers.clear()
    try:
        bench.configure_logging()
        assert root.level == logging.DEBUG
    finally:
        root.handlers[:] = old[0]
        root.setLevel(old[1])
