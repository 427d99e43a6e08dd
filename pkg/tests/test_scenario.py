import math

import numpy as np
import pytest

from orbitfilter.dynamics import ForceModelConfig, measure
from orbitfilter.frames import gmst
from orbitfilter.scenario import (
    GEO_SLOTS_DEG,
    GSO_CROSSINGS_DEG,
    ScenarioConfig,
    StateFileError,
    build_initial_elements,
    dump_state_file,
    generate_truth,
    load_state_file,
    longitude_deg,
    parse_state_file,
    write_state_file,
)
from oracles import GEO_RADIUS

SHORT = dict(duration_s=240.0, cadence_s=24.0, truth_step_s=4.0)


def test_geo_elements():
    el = build_initial_elements(ScenarioConfig(satellite_kind="GEO", geo_longitude_deg=83))
    assert (el.eccentricity, el.inclination, el.semi_major_axis) == (0.0, 0.0, 42164169.0)
    other = build_initial_elements(ScenarioConfig(satellite_kind="GEO", geo_longitude_deg=131))
    assert (other.raan, other.arg_perigee, other.inclination) == (el.raan, el.arg_perigee, el.inclination)
    assert math.remainder(other.true_anomaly - el.true_anomaly, 2 * math.pi) == pytest.approx(math.radians(48))


def test_gso_default_inclination():
    el = build_initial_elements(ScenarioConfig(satellite_kind="GSO"))
    assert el.inclination == 29 * math.pi / 180


@pytest.mark.parametrize("slot", GEO_SLOTS_DEG)
def test_geo_slot_longitude_held(slot):
    cfg = ScenarioConfig(satellite_kind="GEO", geo_longitude_deg=slot, truth_step_s=8.0)
    ds = generate_truth(cfg)
    lons = [longitude_deg(s, t, cfg.epoch0_jd) for t, s in zip(ds.epochs, ds.states)]
    assert max(abs(math.remainder(l - slot, 360)) for l in lons) < 0.1


@pytest.mark.parametrize("crossing", GSO_CROSSINGS_DEG)
def test_gso_crosses_equator_at_configured_longitude(crossing):
    cfg = ScenarioConfig(satellite_kind="GSO", gso_crossing_deg=crossing, **SHORT)
    ds = generate_truth(cfg)
    assert abs(ds.states[0, 2]) < 1e-6 and ds.states[0, 5] > 0  # ascending node
    assert longitude_deg(ds.states[0], 0.0, cfg.epoch0_jd) == pytest.approx(crossing, abs=1e-9)


def test_truth_counts_and_determinism():
    cfg = ScenarioConfig(duration_s=3600.0, cadence_s=24.0, truth_step_s=24.0, seed=3)
    a = generate_truth(cfg)
    b = generate_truth(cfg)
    assert len(a) == 151
    assert np.array_equal(a.states, b.states) and np.array_equal(a.ranges, b.ranges)
    c = generate_truth(ScenarioConfig(duration_s=3600.0, cadence_s=24.0, truth_step_s=24.0, seed=4))
    assert np.array_equal(a.states, c.states) and not np.array_equal(a.ranges, c.ranges)


def test_zero_noise_observations():
    ds = generate_truth(ScenarioConfig(obs_noise_var=0.0, **SHORT))
    assert np.array_equal(ds.ranges, measure(ds.states))


def test_two_body_radius_constant():
    cfg = ScenarioConfig(satellite_kind="GSO", truth_step_s=4.0)
    ds = generate_truth(cfg, ForceModelConfig.two_body())
    r = np.linalg.norm(ds.states[:, :3], axis=1)
    assert np.all(np.abs(r - GEO_RADIUS) < 1e-3)


def test_observation_noise_variance():
    cfg = ScenarioConfig(duration_s=9999.0, cadence_s=1.0, truth_step_s=1.0, obs_noise_var=4.0, seed=1)
    ds = generate_truth(cfg, ForceModelConfig.two_body())
    assert len(ds) == 10000
    v = np.var(ds.ranges - measure(ds.states))
    assert v == pytest.approx(4.0, rel=0.05)


def test_initial_estimate():
    ds = generate_truth(ScenarioConfig(**SHORT))
    assert np.allclose(ds.initial_estimate() - ds.states[0], [10, 10, 10, .1, .1, .1], atol=1e-8)


@pytest.mark.parametrize("kwargs", [
    dict(satellite_kind="MEO"), dict(duration_s=0), dict(cadence_s=-1),
    dict(truth_step_s=30.0), dict(obs_noise_var=-1), dict(init_perturbation=(1, 2)),
    dict(geo_longitude_deg=math.nan), dict(gso_inclination_deg=200), dict(epoch_label="yesterday"),
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        ScenarioConfig(**kwargs)


def test_state_file_round_trip(tmp_path):
    ds = generate_truth(ScenarioConfig(**SHORT))
    path = tmp_path / "s.csv"
    write_state_file(ds, path)
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.startswith(b"epoch_s,x_m,y_m,z_m,vx_mps,vy_mps,vz_mps,range_obs_m\n")
    back = load_state_file(path)
    assert np.allclose(back.states, ds.states, rtol=1e-14, atol=0)
    assert np.allclose(back.ranges, ds.ranges, rtol=1e-14, atol=0)
    assert dump_state_file(back) == raw.decode()


def test_state_file_errors(tmp_path):
    ds = generate_truth(ScenarioConfig(**SHORT))
    text = dump_state_file(ds)
    with pytest.raises(StateFileError, match="empty"):
        parse_state_file("")
    lines = text.splitlines()
    shuffled = "\n".join([lines[0], lines[3], lines[2], *lines[4:]]) + "\n"
    with pytest.raises(StateFileError, match=":3:.*increasing"):
        parse_state_file(shuffled)
    with pytest.raises(StateFileError, match=":2:"):
        parse_state_file(lines[0] + "\n1,2,3\n")
    with pytest.raises(StateFileError, match=":2:"):
        parse_state_file(lines[0] + "\n0,1,2,3,4,5,6,abc\n")
    with pytest.raises(StateFileError, match="non-finite"):
        parse_state_file(lines[0] + "\n0,1,2,3,4,5,6,nan\n")
    with pytest.raises(StateFileError, match="header"):
        parse_state_file("a,b\n1,2\n")
    with pytest.raises(StateFileError, match="no data"):
        parse_state_file(lines[0] + "\n")
