"""Stability checks for fractional-order linear dynamics D^q x = A x."""

import logging
from collections import namedtuple

import numpy as np

from core.errors import NumericalError
from core.lmi import LmiProblem
from core.lmi import NEGDEF
from core.lmi import POSDEF
from core.lmi import VarSpace
from core.lmi import hermitian_to_real
from core.matnum import as_matrix
from core.matnum import check_square
from core.matnum import eigenvalues
from core.optimizer import FEASIBLE
from core.optimizer import INDETERMINATE
from core.optimizer import solve_feasibility

logger = logging.getLogger(__name__)


class StabilityVerdict(namedtuple("StabilityVerdict",
                                  ["stable", "min_arg", "threshold", "eigenvalues"])):
    """stable holds iff min |arg(lambda)| > q pi / 2."""

    @property
    def arg_margin(self):
        return self.min_arg - self.threshold

    def __str__(self):
        return "%s (min |arg| %.4f rad, threshold %.4f rad)" % (
            "stable" if self.stable else "unstable", self.min_arg, self.threshold)


def sector_angle(q):
    """theta = (1 - q) pi / 2, the rotation used by the Hermitian LMI."""
    return (1.0 - q) * np.pi / 2.0


def rotate(x, theta):
    """r X + conj(r) conj(X) with r = exp(i theta), a real expression."""
    r = np.exp(1j * theta)
    return (x * r + x.conj() * np.conj(r)).real


class BaseChecker(object):

    @classmethod
    def check(cls, a, q):
        raise NotImplementedError("Must specify checker.")


class ArgChecker(BaseChecker):

    @classmethod
    def check(cls, a, q):
        spectrum = eigenvalues(a)
        threshold = q * np.pi / 2.0
        min_arg = spectrum.min_abs_arg
        return StabilityVerdict(bool(min_arg > threshold), min_arg, threshold, spectrum.eigenvalues)


class Lemma3Checker(BaseChecker):
    """LMI form: exists Hermitian X > 0 with A Q + Q^T A^T < 0, Q = r X + conj(r X)."""

    @classmethod
    def build(cls, a, q, margin=1e-6):
        a = check_square(as_matrix(a, "A"), "A")
        n = a.shape[0]
        space = VarSpace()
        space.declare("X", "hermitian", n)
        x = space.var("X")
        q_mat = rotate(x, sector_angle(q))
        lyap = a @ q_mat
        problem = LmiProblem(space, name="sector-lmi")
        problem.add(lyap + lyap.T, NEGDEF, margin, name="sector")
        problem.add(hermitian_to_real(x), POSDEF, margin, name="X")
        return problem

    @classmethod
    def check(cls, a, q, margin=1e-6):
        result = solve_feasibility(cls.build(a, q, margin), margin=margin)
        if result.verdict == INDETERMINATE:
            raise NumericalError("sector LMI solve was indeterminate")
        return result.verdict == FEASIBLE


def check_arg_condition(a, q):
    return ArgChecker.check(a, q)


def check_lemma3_lmi(a, q, margin=1e-6):
    return Lemma3Checker.check(a, q, margin)
