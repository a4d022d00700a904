"""test unit for run.py"""

import runtime_path  # isort:skip

import json
import os

import pytest
import run
from core.errors import ConfigError

FIXTURES = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "fixtures")
EXAMPLE1 = os.path.join(FIXTURES, "example1.json")
TABLE1_NC1 = os.path.join(FIXTURES, "table1_nc1.json")
PUBLISHED1 = os.path.join(FIXTURES, "example1_published.json")


def variant(tmp_path, T=None, h=None, seed="keep"):
    with open(EXAMPLE1) as f:
        data = json.load(f)
    if T is not None:
        data["sim"]["T"] = T
    if h is not None:
        data["sim"]["h"] = h
    if seed != "keep":
        data["robustness"]["seed"] = seed
    path = str(tmp_path / "variant.json")
    with open(path, "w") as f:
        json.dump(data, f)
    return path


def test_validate():
    assert run.main(["validate", EXAMPLE1]) == 0


def test_synth_writes_controller(tmp_path, capsys):
    assert run.main(["synth", EXAMPLE1, "--nc", "1", "--out", str(tmp_path)]) == 0
    assert os.path.exists(str(tmp_path / "example1_nc1_controller.json"))
    out = capsys.readouterr().out
    assert "nominal closed loop: stable" in out
    assert out.rstrip().endswith("accepted")


def test_synth_dump_sdpa(tmp_path):
    dump = str(tmp_path / "problem.dat-s")
    code = run.main(["synth", EXAMPLE1, "--nc", "0", "--out", str(tmp_path), "--dump-sdpa", dump])
    assert code == 0
    with open(dump) as f:
        assert f.readline().startswith('"')


def test_analyze_published_controller(capsys):
    assert run.main(["analyze", PUBLISHED1, "--controller", TABLE1_NC1]) == 0
    out = capsys.readouterr().out
    assert "nominal closed loop: stable" in out
    assert "robust analysis: feasible" in out


def test_analyze_rejects(capsys):
    assert run.main(["analyze", EXAMPLE1, "--controller", "none"]) == 2
    assert "nominal closed loop: unstable" in capsys.readouterr().out
    # the published gain is not certified for the larger Lipschitz constant
    assert run.main(["analyze", EXAMPLE1, "--controller", TABLE1_NC1]) == 2


def test_simulate_open_loop(tmp_path):
    path = variant(tmp_path, h=1e-2)
    code = run.main(["simulate", path, "--controller", "none", "--out", str(tmp_path)])
    assert code == 2
    assert os.path.exists(str(tmp_path / "example1_traj_0.csv"))


def test_robustness_needs_seed(tmp_path):
    path = variant(tmp_path, T=1.0, h=1e-2, seed=None)
    assert run.main(["robustness", path, "--controller", "none", "--out", str(tmp_path)]) == 3
    code = run.main(["robustness", path, "--controller", "none", "--seed", "5",
                     "--out", str(tmp_path)])
    assert code in (0, 2)
    assert os.path.exists(str(tmp_path / "example1_report.csv"))


def test_showcase(tmp_path):
    path = variant(tmp_path, T=1.0, h=1e-2)
    assert run.main(["showcase", path, "--systems", "2", "--out", str(tmp_path)]) == 0
    assert os.path.exists(str(tmp_path / "example1_open_traj_1.csv"))


def test_configuration_errors(tmp_path, monkeypatch):
    monkeypatch.setenv("FOLMI_LOG", "bogus")
    assert run.main(["synth", str(tmp_path / "missing.json")]) == 3
    assert run.main(["explode", EXAMPLE1]) == 3
    assert run.main(["synth", EXAMPLE1, "--nc", "-1"]) == 3
    assert run.main(["analyze", EXAMPLE1]) == 3
    assert run.main(["simulate", EXAMPLE1, "--controller", str(tmp_path / "none.json")]) == 3


def test_run_dispatch():
    with pytest.raises(ConfigError):
        run.run("explode", None)


def test_synth_unstabilizable_plant(tmp_path):
    data = {"name": "stuck",
            "plant": {"q": 0.5, "A": [[1.0, 0.0], [0.0, -1.0]], "B": [[0.0], [0.0]],
                      "C": [[0.0, 0.0]]},
            "synth": {"mode": "certain"}}
    path = str(tmp_path / "stuck.json")
    with open(path, "w") as f:
        json.dump(data, f)
    assert run.main(["synth", path, "--out", str(tmp_path)]) == 2
    assert not os.path.exists(str(tmp_path / "stuck_nc0_controller.json"))
