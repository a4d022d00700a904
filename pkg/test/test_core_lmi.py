"""test unit for core/lmi.py"""

import runtime_path  # isort:skip

import io

import numpy as np
import pytest
from core.errors import ConfigError
from core.errors import DimensionError
from core.lmi import NEGDEF
from core.lmi import POSDEF
from core.lmi import AffineMatrixExpr
from core.lmi import LmiProblem
from core.lmi import VarSpace
from core.lmi import assemble_block
from core.lmi import declare
from core.lmi import hermitian_to_real
from core.lmi import recheck
from core.matnum import sym


def test_declare_counts():
    assert declare([("P_u", "symmetric", 2)]).size == 3
    space = declare([
        ("P_u", "symmetric", 2), ("P_d", "symmetric", 1), ("A_hat", "full", (1, 1)),
        ("B_hat", "full", (1, 1)), ("C_hat", "full", (1, 1)), ("D_hat", "full", (1, 1)),
        ("tau", "scalar", None), ("mu", "scalar", None)])
    assert space.size == 10
    offsets = [b.offset for b in space.blocks]
    sizes = [b.size for b in space.blocks]
    assert offsets == list(np.cumsum([0] + sizes[:-1]))
    assert declare([("X", "hermitian", 3)]).size == 9
    assert declare([("K", "skew", 3)]).size == 3


def test_declare_errors():
    with pytest.raises(ConfigError):
        declare([])
    with pytest.raises(ConfigError):
        declare([("P", "symmetric", 2), ("P", "scalar", None)])
    with pytest.raises(ConfigError):
        declare([("P", "diagonal", 2)])
    space = VarSpace()
    space.declare("p", "scalar")
    space.var("p")
    with pytest.raises(ConfigError):
        space.declare("q", "scalar")


def test_variable_values():
    space = declare([("P", "symmetric", 2), ("G", "full", (1, 2))])
    x = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    assert np.allclose(space.value("P", x), [[1.0, 2.0], [2.0, 3.0]])
    assert np.allclose(space.value("G", x), [[4.0, 5.0]])
    h = declare([("X", "hermitian", 2)])
    assert np.allclose(h.value("X", np.array([1.0, 0.5, 2.0, 0.25])),
                       [[1.0, 0.5 + 0.25j], [0.5 - 0.25j, 2.0]])


def test_expression_algebra():
    space = declare([("P", "symmetric", 2), ("t", "scalar", None)])
    p, t = space.var("P"), space.var("t")
    a = np.array([[0.0, 1.0], [-2.0, -3.0]])
    expr = a.T @ p + p @ a + 2.0 * t.eye(2) - np.eye(2)
    x = np.array([1.0, 0.2, 0.7, 0.5])
    pv = np.array([[1.0, 0.2], [0.2, 0.7]])
    assert np.allclose(expr.value(x), a.T @ pv + pv @ a + np.eye(2) * 1.0 - np.eye(2))
    assert expr.is_symmetric()
    assert np.allclose((-expr).value(x), -expr.value(x))
    assert np.allclose((np.eye(2) - p).value(x), np.eye(2) - pv)
    assert expr.F0.shape == (2, 2) and set(expr.terms) <= {0, 1, 2, 3}
    with pytest.raises(DimensionError):
        p + t
    with pytest.raises(DimensionError):
        p.eye(2)


def test_assemble_block_constant():
    m = np.array([[1.0, 2.0], [2.0, 5.0]])
    expr = assemble_block([[m]])
    assert isinstance(expr, AffineMatrixExpr)
    assert np.allclose(expr.F0, m)


def test_assemble_block_mu_blocks():
    space = declare([("mu", "scalar", None)])
    mu = space.var("mu")
    j = np.eye(2)
    expr = assemble_block([[-mu.eye(2), mu.eye(2)], [None, -mu.eye(2) - sym(j)]])
    assert expr.shape == (4, 4)
    assert np.allclose(expr.F0, np.block([[np.zeros((2, 2)), np.zeros((2, 2))],
                                          [np.zeros((2, 2)), -2 * np.eye(2)]]))
    assert np.allclose(expr.coeffs[1], np.block([[-np.eye(2), np.eye(2)], [np.eye(2), -np.eye(2)]]))


def test_assemble_block_zero_fill():
    space = declare([("G", "full", (2, 1))])
    g = space.var("G")
    expr = assemble_block([[np.eye(2), g, None], [None, np.eye(1), None], [None, None, np.eye(3)]])
    assert expr.shape == (6, 6)
    assert expr.is_symmetric()
    with pytest.raises(DimensionError):
        assemble_block([[np.eye(2), np.ones((3, 1))], [None, np.eye(1)]])


def test_hermitian_to_real():
    real = np.array([[2.0, 1.0], [1.0, 3.0]])
    emb = hermitian_to_real(real)
    assert np.allclose(emb.F0, np.block([[real, np.zeros((2, 2))], [np.zeros((2, 2)), real]]))
    emb = hermitian_to_real(np.array([[2.0, 1j], [-1j, 2.0]]))
    assert np.allclose(np.linalg.eigvalsh(emb.F0), [1.0, 1.0, 3.0, 3.0])
    assert np.allclose(hermitian_to_real(np.array([[1.0]])).F0, np.eye(2))
    with pytest.raises(DimensionError):
        hermitian_to_real(np.array([[1.0, 1j], [1j, 1.0]]))


def test_hermitian_to_real_preserves_definiteness():
    rng = np.random.default_rng(5)
    for n in range(1, 5):
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        h = (g + g.conj().T) / 2.0
        emb = np.linalg.eigvalsh(hermitian_to_real(h).F0)
        lam = np.linalg.eigvalsh(h)
        assert abs(emb[0] - lam[0]) < 1e-9
        assert np.allclose(emb, np.sort(np.repeat(lam, 2)), atol=1e-9)


def test_problem_checks():
    space = declare([("p", "scalar", None)])
    p = space.var("p")
    problem = LmiProblem(space)
    with pytest.raises(DimensionError):
        problem.add(assemble_block([[p, p], [np.zeros((1, 1)), p]], symmetric=False), NEGDEF)
    with pytest.raises(ConfigError):
        problem.add(p, "strict")
    with pytest.raises(ConfigError):
        problem.add(p, POSDEF, margin=-1.0)
    with pytest.raises(DimensionError):
        problem.add(p * 1j, POSDEF)
    with pytest.raises(DimensionError):
        problem.add_lower_bound(p.eye(2))
    other = declare([("a", "scalar", None), ("b", "scalar", None)])
    with pytest.raises(DimensionError):
        problem.add(other.var("a"), POSDEF)


def test_recheck():
    space = declare([("p", "scalar", None)])
    p = space.var("p")
    problem = LmiProblem(space)
    problem.add(-2.0 * p, NEGDEF, name="lyap")
    problem.add_lower_bound(p, name="p")
    assert np.allclose(recheck(problem, np.array([0.5])), [1.0, 0.5])
    assert np.min(recheck(problem, np.zeros(1))) <= 0.0
    x = np.array([0.5])
    moved = recheck(problem, x + 1e-12)
    assert np.max(np.abs(moved - recheck(problem, x))) <= 1e-9
    assert np.allclose(problem.recheck(x), recheck(problem, x))


def test_dump_sdpa():
    space = declare([("p", "scalar", None)])
    p = space.var("p")
    problem = LmiProblem(space, name="scalar")
    problem.add(-2.0 * p, NEGDEF, margin=0.0)
    problem.add_lower_bound(p, margin=0.0)
    out = io.StringIO()
    problem.dump_sdpa(out)
    lines = out.getvalue().splitlines()
    assert lines[0].startswith('"scalar')
    assert lines[1:5] == ["2", "2", "1 1", "0 1"]
    entries = [line.split() for line in lines[5:]]
    # block 1 coefficient of p is 2, block 2 is 1; both blocks carry t
    assert ["1", "1", "1", "1", "2"] in entries
    assert ["1", "2", "1", "1", "1"] in entries
    assert ["2", "1", "1", "1", "1"] in entries and ["2", "2", "1", "1", "1"] in entries
