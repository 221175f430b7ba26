import json

import pytest

from drsafe.cli import main


def write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def toy(q0):
    return {"model": {"kind": "affine", "constraints": [{"q": [q0, 0], "R": [[0], [1]]}], "nominal": [1, 0]},
            "samples": {"values": [[0]]}, "ambiguity": {"r": 1, "eps": 1}}


def test_solve_feasible(tmp_path, capsys):
    assert main(["solve", "--config", write(tmp_path, "f.json", toy(-10))]) == 0
    assert capsys.readouterr().out.strip() == "0"


def test_solve_prints_nine_digits(tmp_path, capsys):
    data = toy(-10)
    data["model"]["nominal"] = [1, 12.3456789012]
    assert main(["solve", "--config", write(tmp_path, "f.json", data)]) == 0
    assert capsys.readouterr().out.strip() == "10"
    data["model"]["nominal"] = [1, 1.23456789012]
    main(["solve", "--config", write(tmp_path, "g.json", data)])
    assert capsys.readouterr().out.strip() == "1.23456789"


def test_solve_infeasible_exit_two(tmp_path, capsys):
    assert main(["solve", "--config", write(tmp_path, "i.json", toy(10))]) == 2
    assert "INFEASIBLE" in capsys.readouterr().out


def test_check_exit_codes(tmp_path, capsys):
    assert main(["check", "--config", write(tmp_path, "f.json", toy(-10))]) == 3
    assert main(["check", "--config", write(tmp_path, "i.json", toy(10))]) == 2
    out = capsys.readouterr().out.splitlines()
    assert out == ["Inconclusive", "CertifiedInfeasible"]


def test_check_slack_certifies(tmp_path, capsys):
    data = {"model": {"kind": "affine", "constraints": [{"q": [-1, 0], "R": [[1], [0]]}], "nominal": [1, 0]},
            "samples": {"values": [[v / 10] for v in range(10)]},
            "ambiguity": {"r": 0.01, "eps": 0.1, "c2": 2995.732273553991},
            "certificates": {"slack": [1], "slack_bound": 2}}
    assert main(["check", "--which", "sufficient3", "--config", write(tmp_path, "s.json", data)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("CertifiedFeasible") and "threshold=0.025" in out


def test_check_single_on_two_constraints_is_error(tmp_path, capsys):
    path = write(tmp_path, "m2.json", {"scenario": {"M": 2}})
    assert main(["check", "--which", "sufficient1", "--config", path]) == 1
    assert "WrongM" in capsys.readouterr().err


def test_bad_config_exit_one(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"ambiguity": {"radius": 1}}')
    assert main(["solve", "--config", str(path)]) == 1
    assert "bad.json:1" in capsys.readouterr().err


def test_usage_error_exit_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve"])
    assert exc.value.code == 1


def test_simulate_deterministic(tmp_path, capsys):
    path = write(tmp_path, "s.json", {"scenario": {"M": 2, "horizon": 15}})
    assert main(["simulate", "--config", path, "--out", str(tmp_path / "a"), "--svg"]) == 0
    assert main(["simulate", "--config", path, "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "trajectory.csv").read_bytes()
    assert a == (tmp_path / "b" / "trajectory.csv").read_bytes()
    assert (tmp_path / "a" / "trajectory.svg").exists()


def test_bench_writes_csv(tmp_path, capsys):
    path = write(tmp_path, "b.json", {"bench": {"Ns": [10, 20], "repeats": 3, "min_time": 0}})
    assert main(["bench", "--config", path, "--out", str(tmp_path), "--svg"]) == 0
    lines = (tmp_path / "bench.csv").read_text().splitlines()
    assert lines[0].startswith("scenario,N,M,m,k,method,verdict,time_s,repeats")
    assert len(lines) == 1 + 2 * 4
    assert (tmp_path / "bench_M1.svg").exists()


def test_lipschitz_writes_csv(tmp_path, capsys):
    data = {**toy(-10), "lipschitz": {"dirs": 4, "radii": [1e-2, 1e-3]}}
    assert main(["lipschitz", "--config", write(tmp_path, "l.json", data), "--out", str(tmp_path), "--x", "0"]) == 0
    assert (tmp_path / "lipschitz.csv").read_text().startswith("radius,max_ratio,n_infeasible_probes")


def test_lipschitz_infeasible_base(tmp_path, capsys):
    data = {**toy(10), "lipschitz": {"dirs": 2}}
    assert main(["lipschitz", "--config", write(tmp_path, "i.json", data), "--x", "0"]) == 2
