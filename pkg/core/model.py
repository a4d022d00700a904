"""Plants, uncertainty structure, controllers and closed-loop assembly."""

import logging
from collections import namedtuple

import numpy as np
import scipy.linalg

from core.errors import ConfigError
from core.errors import DimensionError
from core.errors import NumericalError
from core.matnum import as_matrix
from core.matnum import controllability_matrix
from core.matnum import is_posdef
from core.matnum import min_eig
from core.matnum import observability_matrix
from core.matnum import rank
from core.matnum import sym
from core.phiexpr import PhiFunction
from utils.seeder import make_rng

logger = logging.getLogger(__name__)

SAMPLER_RETRIES = 8
SINGULAR_COND = 1e12


def _expect_shape(arr, shape, name):
    if arr.shape != tuple(shape):
        raise DimensionError("%s has shape %s, expected %s" % (name, arr.shape, tuple(shape)))


class UncertaintyModel(object):
    """Delta(sigma) = Z (I + J Z)^-1 entering as A + M Delta N1, B + M Delta N2."""

    def __init__(self, M, N1, N2, J):
        self.M = as_matrix(M, "M")
        self.N1 = as_matrix(N1, "N1")
        self.N2 = as_matrix(N2, "N2")
        self.J = as_matrix(J, "J")
        m0 = self.M.shape[1]
        _expect_shape(self.J, (m0, m0), "J")
        if self.N1.shape[0] != m0:
            raise DimensionError("N1 has %d rows, expected %d" % (self.N1.shape[0], m0))
        if self.N2.shape[0] != m0:
            raise DimensionError("N2 has %d rows, expected %d" % (self.N2.shape[0], m0))

    @property
    def m0(self):
        return self.M.shape[1]


class Plant(object):
    """D^q x = A x + B u + phi(x, u), y = C x, with optional uncertainty."""

    def __init__(self, A, B, C, q, phi=None, xi=0.0, unc=None):
        self.A = as_matrix(A, "A")
        n = self.A.shape[0]
        _expect_shape(self.A, (n, n), "A")
        self.B = as_matrix(B, "B")
        if self.B.shape[0] != n:
            raise DimensionError("B has %d rows, expected %d" % (self.B.shape[0], n))
        self.C = as_matrix(C, "C")
        if self.C.shape[1] != n:
            raise DimensionError("C has %d columns, expected %d" % (self.C.shape[1], n))
        self.q = float(q)
        self.xi = float(xi)
        if phi is None:
            phi = PhiFunction.zero(n, self.m)
        if (phi.n_states, phi.n_inputs) != (n, self.m):
            raise DimensionError("phi is declared over (%d states, %d inputs), plant has (%d, %d)"
                                 % (phi.n_states, phi.n_inputs, n, self.m))
        self.phi = phi
        if unc is not None:
            if unc.M.shape[0] != n:
                raise DimensionError("M has %d rows, expected %d" % (unc.M.shape[0], n))
            _expect_shape(unc.N1, (unc.m0, n), "N1")
            _expect_shape(unc.N2, (unc.m0, self.m), "N2")
        self.unc = unc

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    def replace(self, **changes):
        fields = dict(A=self.A, B=self.B, C=self.C, q=self.q, phi=self.phi,
                      xi=self.xi, unc=self.unc)
        fields.update(changes)
        return Plant(**fields)


class Controller(object):
    """x_c' = Ac x_c + Bc y, u = Cc x_c + Dc y (fractional order of the plant)."""

    def __init__(self, Ac, Bc, Cc, Dc):
        self.Dc = as_matrix(Dc, "Dc")
        m, p = self.Dc.shape
        self.Ac = as_matrix(Ac, "Ac")
        n_c = self.Ac.shape[0]
        _expect_shape(self.Ac, (n_c, n_c), "Ac")
        self.Bc = np.zeros((0, p)) if n_c == 0 else as_matrix(Bc, "Bc")
        self.Cc = np.zeros((m, 0)) if n_c == 0 else as_matrix(Cc, "Cc")
        _expect_shape(self.Bc, (n_c, p), "Bc")
        _expect_shape(self.Cc, (m, n_c), "Cc")

    @classmethod
    def static(cls, Dc):
        return cls([], [], [], Dc)

    @classmethod
    def zero(cls, m, p):
        return cls.static(np.zeros((m, p)))

    @property
    def n_c(self):
        return self.Ac.shape[0]

    def check_against(self, plant):
        if self.Dc.shape != (plant.m, plant.p):
            raise DimensionError("controller Dc has shape %s, plant needs %s"
                                 % (self.Dc.shape, (plant.m, plant.p)))

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in ("Ac", "Bc", "Cc", "Dc")}

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(data["Ac"], data["Bc"], data["Cc"], data["Dc"])
        except KeyError as e:
            raise ConfigError("controller is missing %s" % e)


ClosedLoop = namedtuple("ClosedLoop", ["A_psi", "Mtilde", "Ntilde"])


def assemble_closed_loop(plant, ctrl):
    ctrl.check_against(plant)
    A, B, C = plant.A, plant.B, plant.C
    a_psi = np.block([[A + B @ ctrl.Dc @ C, B @ ctrl.Cc],
                      [ctrl.Bc @ C, ctrl.Ac]])
    if plant.unc is None:
        m_tilde = np.zeros((plant.n + ctrl.n_c, 0))
        n_tilde = np.zeros((0, plant.n + ctrl.n_c))
    else:
        unc = plant.unc
        m_tilde = np.vstack([unc.M, np.zeros((ctrl.n_c, unc.m0))])
        n_tilde = np.hstack([unc.N1 + unc.N2 @ ctrl.Dc @ C, unc.N2 @ ctrl.Cc])
    return ClosedLoop(a_psi, m_tilde, n_tilde)


ValidationCheck = namedtuple("ValidationCheck", ["name", "passed", "detail"])


class ValidationReport(object):

    def __init__(self, checks):
        self.checks = list(checks)

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def __str__(self):
        return "\n".join("%-16s %s  %s" % (c.name, "pass" if c.passed else "FAIL", c.detail)
                         for c in self.checks)


def validate(plant):
    n = plant.n
    checks = []
    r_ctrb = rank(controllability_matrix(plant.A, plant.B))
    checks.append(ValidationCheck("controllable", r_ctrb == n, "rank %d of %d" % (r_ctrb, n)))
    r_obsv = rank(observability_matrix(plant.A, plant.C))
    checks.append(ValidationCheck("observable", r_obsv == n, "rank %d of %d" % (r_obsv, n)))
    if plant.unc is None:
        checks.append(ValidationCheck("sym_j_posdef", True, "no uncertainty model"))
    else:
        sym_j = sym(plant.unc.J)
        checks.append(ValidationCheck("sym_j_posdef", is_posdef(sym_j),
                                      "min eig %.6g" % min_eig(sym_j)))
    checks.append(ValidationCheck("order_range", 0.0 < plant.q < 1.0, "q = %g" % plant.q))
    at_origin = plant.phi.eval(np.zeros(n), np.zeros(plant.m))
    checks.append(ValidationCheck("phi_origin", float(np.max(np.abs(at_origin), initial=0.0)) <= 1e-12,
                                  "|phi(0,0)| = %.3g" % np.max(np.abs(at_origin), initial=0.0)))
    checks.append(ValidationCheck("xi_nonneg", plant.xi >= 0.0, "xi = %g" % plant.xi))
    return ValidationReport(checks)


def delta_from_z(z, J):
    """Delta = Z (I + J Z)^-1, or None when I + J Z is numerically singular."""
    m0 = z.shape[0]
    lhs = np.eye(m0) + J @ z
    if np.linalg.cond(lhs) > SINGULAR_COND:
        return None
    # Delta X = Z with X = I + J Z, solved as X^T Delta^T = Z^T
    return scipy.linalg.solve(lhs.T, z.T).T


def sample_uncertainty(unc, seed, scale=1.0, index=0, z=None):
    """Admissible Delta from stream ``index`` of ``seed``.

    Z = scale * (S S^T + K) with S Gaussian and K skew-symmetric, so
    Sym(Z) >= 0. Passing ``z`` bypasses the draw.
    """
    if scale < 0:
        raise ConfigError("uncertainty scale must be non-negative")
    m0 = unc.m0
    if z is not None:
        delta = delta_from_z(as_matrix(z, "Z"), unc.J)
        if delta is None:
            raise NumericalError("I + J Z is singular for the given Z")
        return delta
    rng = make_rng(seed, index)
    for _ in range(SAMPLER_RETRIES):
        s = rng.standard_normal((m0, m0))
        k = rng.standard_normal((m0, m0))
        z = scale * (s @ s.T + (k - k.T) / 2.0)
        delta = delta_from_z(z, unc.J)
        if delta is not None:
            return delta
        logger.debug("resampling Z: I + J Z singular (stream %d)", index)
    raise NumericalError("uncertainty sampler exhausted %d retries" % SAMPLER_RETRIES)


def admissibility_gap(delta, J):
    """Smallest eigenvalue of Sym(Delta) - Delta Sym(J) Delta^T."""
    gap = sym(delta) - delta @ sym(J) @ delta.T
    return min_eig((gap + gap.T) / 2.0)


def is_admissible(delta, J, tol=1e-10):
    """Both clauses of the admissibility predicate for Delta."""
    m0 = delta.shape[0]
    if np.linalg.cond(np.eye(m0) - delta @ J) > SINGULAR_COND:
        return False
    return admissibility_gap(delta, J) >= -tol


def realize_plant(plant, delta):
    """Nominal plant with the uncertainty Delta substituted."""
    unc = plant.unc
    if unc is None:
        raise ConfigError("plant has no uncertainty model")
    delta = as_matrix(delta, "Delta")
    _expect_shape(delta, (unc.m0, unc.m0), "Delta")
    return plant.replace(A=plant.A + unc.M @ delta @ unc.N1,
                         B=plant.B + unc.M @ delta @ unc.N2,
                         unc=None)
