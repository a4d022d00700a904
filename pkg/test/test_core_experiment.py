"""test unit for core/experiment.py"""

import runtime_path  # isort:skip

import os

import numpy as np
import pytest
from core.errors import ConfigError
from core.experiment import open_loop_showcase
from core.experiment import read_report
from core.experiment import read_trajectory
from core.experiment import report_path
from core.experiment import run_monte_carlo
from core.experiment import trajectory_path
from core.experiment import write_csv
from core.model import Controller
from core.model import Plant
from core.simulator import simulate_closed_loop
from core.synthesis import synthesize
from utils.config import load_config
from utils.config import load_controller

FIXTURES = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "fixtures")
SEED = 2021
STEP = 1e-2


def config(name):
    return load_config(os.path.join(FIXTURES, name))


@pytest.fixture(scope="module")
def example1():
    return config("example1.json")


@pytest.fixture(scope="module")
def example2():
    return config("example2.json")


@pytest.mark.parametrize("name", ["example1", "example2"])
def test_synthesized_controller_is_robust(name, request):
    cfg = request.getfixturevalue(name)
    result = synthesize(cfg.plant, 2)
    assert result.accepted
    report = run_monte_carlo(cfg.plant, result.controller, 50, SEED, x0=cfg.x0, h=STEP)
    assert report.n_samples == 50
    assert report.stable_fraction == 1.0
    assert report.worst_final_norm < 0.01
    assert all(s.arg_stable and not s.error for s in report.samples)


def test_zero_controller_is_not_robust(example1):
    report = run_monte_carlo(example1.plant, Controller.zero(1, 1), 50, SEED, x0=example1.x0,
                             h=STEP)
    assert report.stable_fraction == 0.0
    assert report.worst_final_norm > 0.01


def test_zero_scale_repeats_nominal(example1):
    ctrl = Controller.static([[-1.6]])
    report = run_monte_carlo(example1.plant, ctrl, 3, SEED, scale=0.0, x0=example1.x0, T=2.0,
                             h=STEP)
    nominal = simulate_closed_loop(example1.plant, None, ctrl, example1.x0, T=2.0, h=STEP)
    for s in report.samples:
        assert s.delta_norm == 0.0
        assert s.final_norm == pytest.approx(nominal.final_norm, rel=1e-12)


def test_workers_match_serial(example1):
    ctrl = Controller.static([[-1.6]])
    serial = run_monte_carlo(example1.plant, ctrl, 6, SEED, x0=example1.x0, T=2.0, h=STEP)
    pooled = run_monte_carlo(example1.plant, ctrl, 6, SEED, x0=example1.x0, T=2.0, h=STEP,
                             workers=2)
    assert [s.index for s in pooled.samples] == list(range(6))
    assert [s.final_norm for s in pooled.samples] == [s.final_norm for s in serial.samples]
    assert [s.delta_norm for s in pooled.samples] == [s.delta_norm for s in serial.samples]


def test_monte_carlo_errors(example1):
    ctrl = Controller.static([[-1.6]])
    with pytest.raises(ConfigError):
        run_monte_carlo(example1.plant.replace(unc=None), ctrl, 3, SEED)
    with pytest.raises(ConfigError):
        run_monte_carlo(example1.plant, ctrl, -1, SEED)
    empty = run_monte_carlo(example1.plant, ctrl, 0, SEED)
    assert empty.n_samples == 0 and empty.stable_fraction == 0.0


def test_open_loop_showcase(example1):
    runs = open_loop_showcase(example1.plant, 5, SEED, example1.x0, h=STEP)
    assert len(runs) == 5
    assert not any(traj.is_convergent() for traj in runs)
    assert open_loop_showcase(example1.plant, 0, SEED, example1.x0) == []
    stable = Plant([[-1.0]], [[1.0]], [[1.0]], 0.9)
    runs = open_loop_showcase(stable, 2, SEED, [1.0], h=STEP)
    for traj in runs:
        assert traj.final_norm < 0.1
        assert traj.peak_norm == pytest.approx(1.0)


def test_trajectory_csv(example1, tmp_path):
    ctrl = load_controller(os.path.join(FIXTURES, "table1_nc1.json"), example1.plant)
    traj = simulate_closed_loop(example1.plant, None, ctrl, example1.x0, T=1.0, h=STEP)
    path = trajectory_path(str(tmp_path), "example1", 0)
    assert path.endswith("example1_traj_0.csv")
    write_csv(traj, path)
    with open(path) as f:
        lines = f.read().splitlines()
    assert lines[0] == "t,x1,x2,xc1,u1,y1"
    assert len(lines) == 102
    assert lines[1].startswith("0.000000000,-0.300000000,0.300000000,0.000000000")
    again = read_trajectory(path)
    assert np.allclose(again.x, traj.x, atol=1e-8)
    assert np.allclose(again.u, traj.u, atol=1e-8)
    assert again.xc.shape == (101, 1)


def test_csv_is_deterministic(example1, tmp_path):
    ctrl = Controller.static([[-1.6]])
    for name in ("a", "b"):
        report = run_monte_carlo(example1.plant, ctrl, 3, SEED, x0=example1.x0, T=1.0, h=STEP)
        write_csv(report, report_path(str(tmp_path), name))
    with open(report_path(str(tmp_path), "a"), "rb") as a, \
            open(report_path(str(tmp_path), "b"), "rb") as b:
        assert a.read() == b.read()


def test_report_csv(example1, tmp_path):
    ctrl = Controller.static([[-1.6]])
    report = run_monte_carlo(example1.plant, ctrl, 4, SEED, x0=example1.x0, T=1.0, h=STEP)
    path = report_path(str(tmp_path), "example1")
    write_csv(report, path)
    with open(path) as f:
        lines = f.read().splitlines()
    assert lines[0] == "index,delta_norm,arg_stable,min_arg,final_norm,diverged,stable,error"
    assert lines[-1].startswith("aggregate,,,,")
    samples, fraction, worst = read_report(path)
    assert [s.index for s in samples] == [0, 1, 2, 3]
    assert fraction == pytest.approx(report.stable_fraction)
    assert worst == pytest.approx(report.worst_final_norm, abs=1e-9)
    with pytest.raises(ConfigError):
        write_csv(ctrl, str(tmp_path / "controller.csv"))
    with pytest.raises(ConfigError):
        read_report(_trajectory_file(example1, tmp_path))
    with pytest.raises(ConfigError):
        read_trajectory(path)


def _trajectory_file(cfg, tmp_path):
    traj = simulate_closed_loop(cfg.plant, None, Controller.static([[-1.6]]), cfg.x0, T=0.1,
                                h=STEP)
    path = trajectory_path(str(tmp_path), "short", 0)
    write_csv(traj, path)
    return path
