from pathlib import Path

import numpy as np
import pytest

from drsafe.dro import SampleSet
from drsafe.exceptions import ConfigError
from drsafe.model import unicycle_model
from drsafe.sim import (
    LOG_COLUMNS,
    ScenarioConfig,
    paper_scenario,
    run_closed_loop,
    sample_uncertainty,
    step,
    wrap_angle,
)

DATA = Path(__file__).parent / "data"


def test_samples_match_golden_file():
    golden = SampleSet.from_csv(DATA / "samples_seed7.csv")
    assert np.array_equal(sample_uncertainty(count=3, seed=7).samples, golden.samples)


def test_sampler_moments():
    xs = sample_uncertainty(count=1_000_000, seed=1).samples
    assert abs(xs[:, 0].mean() - 0.5) < 0.01
    assert abs(xs[:, 0].var() - 1.0) < 0.01
    assert xs[:, 1].min() >= -1 and xs[:, 1].max() <= 1
    assert np.all((xs[:, 2] > 0) & (xs[:, 2] <= 1))
    assert abs(xs[:, 2].mean() - 2 / 2.2) < 0.01


def test_nominal_unicycle_step():
    model = unicycle_model(0.05)
    x = step(model, np.zeros(3), [1.0, 0.0], 0.1, np.zeros(3))
    np.testing.assert_allclose(x, [0.1, 0.0, 0.0], atol=1e-15)


def test_drift_only_step():
    model = unicycle_model(0.05)
    dt = 1e-3
    x = step(model, np.zeros(3), [0.0, 0.0], dt, [1.0, 0.0, 0.0])
    np.testing.assert_allclose(x, dt * np.array([0.02, 0.02, 0.01]), rtol=1e-12)


def test_wrap_angle():
    assert wrap_angle(3 * np.pi / 2) == pytest.approx(-np.pi / 2)
    assert wrap_angle(0.3) == pytest.approx(0.3)


def test_zero_horizon_logs_initial_state():
    log = run_closed_loop(paper_scenario(1, horizon=0))
    assert len(log.records) == 1
    np.testing.assert_array_equal(log.records[0].state, [0.0, 0.0, 0.0])


@pytest.fixture(scope="module")
def short_log():
    return run_closed_loop(paper_scenario(2, horizon=40, seed=3))


def test_log_invariants(short_log):
    Ns = [rec.N for rec in short_log.records]
    rs = [rec.r for rec in short_log.records]
    ts = short_log.times
    assert np.all(np.diff(ts) > 0)
    assert np.all(np.diff(Ns) >= 0)
    assert np.all(np.diff(rs) <= 0)
    assert max(rs) <= short_log.config.r0
    assert all(rec.eps <= 1.0 / rec.N + 1e-15 for rec in short_log.records)
    assert short_log.mirror_violations() == 0


def test_problem_at_reproduces_logged_solve(short_log):
    from drsafe.socp.synthesis import synthesize

    i = 5
    rec = short_log.records[i]
    res = synthesize(short_log.problem_at(i), rec.state)
    assert res.status.value == rec.status
    if res.feasible:
        np.testing.assert_allclose(res.u, rec.u, atol=1e-9)


def test_rerun_is_bit_identical(tmp_path, short_log):
    again = run_closed_loop(short_log.config)
    short_log.to_csv(tmp_path / "a.csv", timings=False)
    again.to_csv(tmp_path / "b.csv", timings=False)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    header = (tmp_path / "a.csv").read_text().splitlines()[0]
    assert header == ",".join(LOG_COLUMNS)


def test_svg_written(tmp_path, short_log):
    short_log.to_svg(tmp_path / "t.svg")
    text = (tmp_path / "t.svg").read_text()
    assert text.startswith("<svg") or text.startswith("<?xml")
    assert "circle" in text


def test_config_validation():
    with pytest.raises(ConfigError):
        ScenarioConfig(M=3)
    with pytest.raises(ConfigError):
        ScenarioConfig(dt=0.0)
    with pytest.raises(ConfigError):
        ScenarioConfig(eps=0.5, N0=3)
    with pytest.raises(ConfigError):
        ScenarioConfig(checkers=("sufficient3",))
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"bogus": 1})
    cfg = paper_scenario(2)
    assert ScenarioConfig.from_dict(cfg.to_dict()) == cfg


def test_all_checkers_logged():
    cfg = paper_scenario(1, horizon=3, checkers=("necessary", "sufficient1", "sufficient3"), slack=(1.0,))
    log = run_closed_loop(cfg)
    for rec in log.records[:-1]:
        assert set(rec.verdicts) == {"necessary", "sufficient1", "sufficient3"}
