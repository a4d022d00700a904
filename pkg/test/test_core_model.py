"""test unit for core/model.py"""

import runtime_path  # isort:skip

import numpy as np
import pytest
from core.errors import ConfigError
from core.errors import DimensionError
from core.model import Controller
from core.model import Plant
from core.model import UncertaintyModel
from core.model import admissibility_gap
from core.model import assemble_closed_loop
from core.model import is_admissible
from core.model import realize_plant
from core.model import sample_uncertainty
from core.model import validate
from core.phiexpr import parse

A = [[0.0, 1.0], [2.0, -6.0]]
B = [[1.0], [0.5]]
M = [[0.5, 1.0], [-0.4, 0.2]]
N1 = [[0.5, 1.5], [0.0, 0.5]]
N2 = [[1.0], [-0.5]]


@pytest.fixture
def unc():
    return UncertaintyModel(M, N1, N2, np.eye(2))


@pytest.fixture
def example1(unc):
    phi = parse("sin(x2); -sin(x1)+0.5*sin(x2*u1)", 2, 1)
    return Plant(A, B, [[1.0, 1.0]], 0.9, phi=phi, xi=1.0, unc=unc)


@pytest.fixture
def example2(unc):
    phi = parse("sin(x2); -sin(x1)+0.5*sin(x2*u1)", 2, 1)
    return Plant(A, B, [[1.0, 2.0], [0.5, 1.0]], 0.9, phi=phi, xi=1.0, unc=unc)


def test_plant_dimensions(example1, example2):
    assert (example1.n, example1.m, example1.p) == (2, 1, 1)
    assert example2.p == 2
    with pytest.raises(DimensionError):
        Plant(A, [[1.0], [0.5], [0.0]], [[1.0, 1.0]], 0.9)
    with pytest.raises(DimensionError):
        Plant(A, B, [[1.0, 1.0, 1.0]], 0.9)
    with pytest.raises(DimensionError):
        Plant(A, B, [[1.0, 1.0]], 0.9, phi=parse("x1", 1, 1))
    with pytest.raises(DimensionError):
        UncertaintyModel(M, N1, N2, np.eye(3))


def test_validate_examples(example1, example2):
    for plant in (example1, example2):
        report = validate(plant)
        assert report.ok, str(report)
        assert report["observable"].passed
    assert "controllable" in str(validate(example1))


def test_validate_failures(example1):
    report = validate(Plant(np.zeros((2, 2)), np.zeros((2, 1)), np.eye(2), 0.5))
    assert not report["controllable"].passed
    assert not report.ok
    bad = example1.replace(q=1.2, xi=-1.0, phi=parse("1 + x1; 0", 2, 1),
                           unc=UncertaintyModel(M, N1, N2, -np.eye(2)))
    failed = {c.name for c in validate(bad).failures()}
    assert failed == {"order_range", "xi_nonneg", "phi_origin", "sym_j_posdef"}


def test_closed_loop_static(example1):
    cl = assemble_closed_loop(example1, Controller.static([[-1.6]]))
    assert np.allclose(cl.A_psi, [[-1.6, -0.6], [1.2, -6.8]])
    assert cl.Mtilde.shape == (2, 2) and cl.Ntilde.shape == (2, 2)
    assert np.allclose(cl.Ntilde, np.array(N1) + np.array(N2) @ [[-1.6]] @ [[1.0, 1.0]])
    zero = assemble_closed_loop(example1, Controller.zero(1, 1))
    assert np.array_equal(zero.A_psi, example1.A)


def test_closed_loop_dynamic(example1):
    ctrl = Controller([[-1.3]], [[-2.8]], [[0.6]], [[-2.3]])
    cl = assemble_closed_loop(example1, ctrl)
    expected = [[-2.3, -1.3, 0.6], [0.85, -7.15, 0.3], [-2.8, -2.8, -1.3]]
    assert np.allclose(cl.A_psi, expected)
    assert np.allclose(cl.Mtilde, np.vstack([M, np.zeros((1, 2))]))
    assert cl.Ntilde.shape == (2, 3)
    assert np.allclose(cl.Ntilde[:, 2:], np.array(N2) * 0.6)


def test_controller_shapes(example1, example2):
    assert Controller.static([[-1.0]]).n_c == 0
    ctrl = Controller([[-1.4]], [[-0.3, 0.0]], [[0.1]], [[-1.6, 0.3]])
    assert ctrl.n_c == 1
    ctrl.check_against(example2)
    with pytest.raises(DimensionError):
        ctrl.check_against(example1)
    with pytest.raises(DimensionError):
        Controller([[-1.0]], [[1.0, 2.0]], [[1.0]], [[1.0]])
    again = Controller.from_dict(ctrl.to_dict())
    assert np.array_equal(again.Bc, ctrl.Bc)
    with pytest.raises(ConfigError):
        Controller.from_dict({"Dc": [[1.0]]})


def test_sample_uncertainty_scale_zero(unc):
    assert np.all(sample_uncertainty(unc, seed=5, scale=0.0) == 0.0)


def test_sample_uncertainty_forced_z(unc):
    delta = sample_uncertainty(unc, seed=0, z=np.eye(2))
    assert np.allclose(delta, 0.5 * np.eye(2))


def test_sample_uncertainty_reproducible(unc):
    a = sample_uncertainty(unc, seed=42, index=3)
    b = sample_uncertainty(unc, seed=42, index=3)
    c = sample_uncertainty(unc, seed=42, index=4)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)
    with pytest.raises(ConfigError):
        sample_uncertainty(unc, seed=0, scale=-1.0)


@pytest.mark.parametrize("j", [np.eye(2), [[2.0, 0.5], [-0.5, 1.0]]])
def test_sampled_uncertainty_is_admissible(j):
    model = UncertaintyModel(M, N1, N2, j)
    for i in range(1000):
        delta = sample_uncertainty(model, seed=2021, index=i)
        assert np.linalg.cond(np.eye(2) - delta @ model.J) < 1e12
        assert admissibility_gap(delta, model.J) >= -1e-10
        assert is_admissible(delta, model.J)


def test_realize_plant(example1):
    nominal = realize_plant(example1, np.zeros((2, 2)))
    assert np.allclose(nominal.A, example1.A) and np.allclose(nominal.B, example1.B)
    assert nominal.unc is None
    half = realize_plant(example1, 0.5 * np.eye(2))
    assert np.allclose(half.A, [[0.125, 1.625], [1.9, -6.25]])
    assert np.allclose(half.B, example1.B + 0.5 * np.array(M) @ np.array(N2))
    with pytest.raises(DimensionError):
        realize_plant(example1, np.eye(3))
    with pytest.raises(ConfigError):
        realize_plant(nominal, np.eye(2))


def test_realize_plant_is_affine(example1, unc):
    delta = sample_uncertainty(unc, seed=9)
    base = realize_plant(example1, delta)
    for alpha in (0.0, 0.3, 2.0):
        scaled = realize_plant(example1, alpha * delta)
        assert np.allclose(scaled.A, example1.A + alpha * (base.A - example1.A))
        assert np.allclose(scaled.B, example1.B + alpha * (base.B - example1.B))
