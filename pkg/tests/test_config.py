import json

import numpy as np
import pytest

from drsafe.config import RunConfig, load_config
from drsafe.exceptions import ConfigError

AFFINE = {"model": {"kind": "affine", "constraints": [{"q": [-10, 0], "R": [[0], [1]]}], "nominal": [1, 0]},
          "samples": {"values": [[0]]}, "ambiguity": {"r": 1, "eps": 1}}


def test_affine_problem_built():
    p, x0 = RunConfig.from_dict(AFFINE).problem()
    assert x0 is None and p.M == 1 and p.N == 1
    assert p.ambiguity.r == 1.0 and p.ambiguity.k == 1


def test_eps_defaults_to_one_over_N():
    data = json.loads(json.dumps(AFFINE))
    data["samples"] = {"values": [[0], [1], [2], [3]]}
    del data["ambiguity"]["eps"]
    p, _ = RunConfig.from_dict(data).problem()
    assert p.ambiguity.eps == 0.25


def test_sampler_block_is_seeded():
    data = json.loads(json.dumps(AFFINE))
    data["samples"] = {"sampler": [["normal", 0, 1]], "N": 5}
    data["ambiguity"]["eps"] = 0.2
    cfg = RunConfig.from_dict(data)
    a, b = cfg.problem(1)[0], cfg.problem(1)[0]
    assert np.array_equal(a.samples.samples, b.samples.samples)
    assert not np.array_equal(a.samples.samples, cfg.problem(2)[0].samples.samples)


def test_unknown_key_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "ambiguity": {\n    "r": 1, "radius": 3\n  }\n}\n')
    with pytest.raises(ConfigError, match=r"bad\.json:3: .*radius"):
        load_config(path)


def test_json_syntax_error_reports_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "seed": 1,\n}\n')
    with pytest.raises(ConfigError, match=r"broken\.json:3:1"):
        load_config(path)


def test_type_errors_rejected():
    with pytest.raises(ConfigError):
        RunConfig.from_text('{"seed": "one"}')
    with pytest.raises(ConfigError):
        RunConfig.from_text('{"bench": {"methods": ["Fast"]}}')


def test_affine_requires_fields():
    with pytest.raises(ConfigError, match="ambiguity.r"):
        RunConfig.from_dict({**AFFINE, "ambiguity": {"eps": 1}})


def test_invalid_scenario_reported_eagerly():
    with pytest.raises(ConfigError, match="scenario"):
        RunConfig.from_text('{"scenario": {"M": 3}}', "s.json")


def test_unicycle_default():
    cfg = RunConfig.from_text("{}")
    assert cfg.kind == "unicycle" and not cfg.require_invertible
    p, x0 = cfg.problem()
    np.testing.assert_array_equal(x0, [0.0, 0.0, 0.0])
    assert p.M == 1


def test_scenario_seed_override():
    cfg = RunConfig.from_text('{"seed": 4, "scenario": {"M": 2}}')
    assert cfg.scenario_config().seed == 4
    assert cfg.scenario_config(9).seed == 9
    assert cfg.scenario_config().goal == (5.0, 5.0)


def test_slack_certificate_defaults():
    data = {**AFFINE, "certificates": {"slack": [1.0]}}
    cfg = RunConfig.from_dict(data)
    p, x = cfg.problem()
    cert = cfg.slack_certificate(p, x)
    assert cert.S == (1.0,) and cert.B == 1.0
    with pytest.raises(ConfigError):
        RunConfig.from_dict(AFFINE).slack_certificate(p, x)
