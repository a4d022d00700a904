"""Strict-feasibility solver for LMI problems.

Every constraint is brought into one cone family: with s = +1 for negdef
and s = -1 for posdef constraints, the solver minimizes t subject to

    G_k(x, t) = t I - s_k (F_k(x) + s_k margin_k I) / scale_k  >  0,

where scale_k is the largest absolute coefficient of constraint k. The
problem is feasible iff t* < -margin. Each G_k is kept strictly positive by a
log-det barrier, and a ball |x| < radius keeps the iterates bounded. The
barrier weight on t grows tenfold after every centring pass (Newton steps
with backtracking).
"""

import logging

import numpy as np
import scipy.linalg

from core.errors import NumericalError
from core.lmi import DEFAULT_MARGIN
from core.lmi import NEGDEF
from core.lmi import recheck

logger = logging.getLogger(__name__)

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
INDETERMINATE = "indeterminate"


class Feasibility(object):
    """Outcome of a feasibility solve.

    ``assignment`` is set only for feasible problems. ``residuals`` holds the
    recheck margins at the last iterate and ``achieved_margin`` their minimum.
    """

    def __init__(self, verdict, assignment=None, t=np.nan, iterations=0,
                 residuals=None, problem=None):
        self.verdict = verdict
        self.assignment = assignment
        self.t = t
        self.iterations = iterations
        self.residuals = residuals if residuals is not None else np.zeros(0)
        self.problem = problem

    @property
    def feasible(self):
        return self.verdict == FEASIBLE

    @property
    def achieved_margin(self):
        return float(np.min(self.residuals)) if len(self.residuals) else np.nan

    def __repr__(self):
        return "Feasibility(%s, t=%.4g, iterations=%d)" % (self.verdict, self.t, self.iterations)


class BaseSolver(object):

    def __init__(self, tol, max_iter, margin):
        self.tol = tol
        self.max_iter = max_iter
        self.margin = margin

    def solve(self, problem):
        raise NotImplementedError


class _Block(object):
    """One constraint in G = t I + A0 + sum_i x_i A_i form, pre-scaled."""

    def __init__(self, constraint, margin_floor):
        s = 1.0 if constraint.sense == NEGDEF else -1.0
        coeffs = np.array(constraint.expr.coeffs, dtype=float)
        d = coeffs.shape[1]
        margin = max(constraint.margin, margin_floor)
        coeffs[0] += s * margin * np.eye(d)
        scale = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
        self.scale = scale if scale > 0.0 else 1.0
        self.stack = -s * coeffs / self.scale
        self.dim = d
        # derivative of G with respect to (x_1..x_N, t)
        self.dirs = np.concatenate([self.stack[1:], np.eye(d)[None]], axis=0)

    def value(self, x, t):
        return t * np.eye(self.dim) + self.stack[0] + np.tensordot(x, self.stack[1:], axes=1)


class BarrierSolver(BaseSolver):

    def __init__(self, tol=1e-9, max_iter=500, margin=DEFAULT_MARGIN, radius=1e4,
                 early_exit=True, max_newton=100, growth=10.0):
        super().__init__(tol, max_iter, margin)
        self.radius = radius
        self.early_exit = early_exit
        self.max_newton = max_newton
        self.growth = growth

    def solve(self, problem):
        blocks = [_Block(c, self.margin) for c in problem.constraints]
        if not blocks:
            raise NumericalError("problem %r has no constraints" % problem.name)
        n = problem.nvars
        x = np.zeros(n)
        t = max(-np.linalg.eigvalsh(b.stack[0])[0] for b in blocks) + 1.0
        weight = 1.0
        barrier_count = sum(b.dim for b in blocks) + 1
        iterations = 0
        verdict = INDETERMINATE
        while iterations < self.max_iter:
            x, t, iterations, capped = self._centre(blocks, x, t, weight, iterations)
            gap = barrier_count / weight
            logger.debug("%s: weight %.1e t %.6g gap %.3g after %d iterations",
                         problem.name, weight, t, gap, iterations)
            converged = gap < self.tol * max(1.0, abs(t))
            if t < -self.margin and (self.early_exit or converged):
                verdict = FEASIBLE
                break
            if t - gap > -self.margin:
                verdict = INFEASIBLE
                break
            if converged:
                verdict = FEASIBLE if t < -self.margin else INFEASIBLE
                break
            if capped:
                break
            weight *= self.growth
        if verdict == INDETERMINATE and t < -self.margin:
            # out of iterations, but the iterate is strictly feasible
            verdict = FEASIBLE
        residuals = recheck(problem, x)
        logger.info("%s: %s (t=%.4g, %d iterations, min margin %.3g)",
                    problem.name, verdict, t, iterations, np.min(residuals))
        return Feasibility(verdict, x.copy() if verdict == FEASIBLE else None, float(t),
                           iterations, residuals, problem)

    def _potential(self, blocks, x, t, weight):
        rr = self.radius ** 2 - float(x @ x)
        if rr <= 0.0:
            return np.inf
        value = weight * t - np.log(rr)
        for b in blocks:
            try:
                chol = scipy.linalg.cholesky(b.value(x, t), lower=True)
            except scipy.linalg.LinAlgError:
                return np.inf
            value -= 2.0 * np.sum(np.log(np.diag(chol)))
        return value

    def _centre(self, blocks, x, t, weight, iterations):
        n = x.size
        for _ in range(self.max_newton):
            if iterations >= self.max_iter:
                return x, t, iterations, True
            iterations += 1
            grad = np.zeros(n + 1)
            grad[n] = weight
            hess = np.zeros((n + 1, n + 1))
            for b in blocks:
                try:
                    g_inv = scipy.linalg.inv(b.value(x, t))
                except scipy.linalg.LinAlgError as e:
                    raise NumericalError("barrier matrix became singular: %s" % e)
                d = np.matmul(g_inv, b.dirs)
                grad -= np.einsum("kii->k", d)
                hess += np.einsum("iab,jba->ij", d, d)
            rr = self.radius ** 2 - float(x @ x)
            grad[:n] += 2.0 * x / rr
            hess[:n, :n] += 2.0 / rr * np.eye(n) + 4.0 * np.outer(x, x) / rr ** 2
            if not (np.all(np.isfinite(grad)) and np.all(np.isfinite(hess))):
                raise NumericalError("non-finite Newton system")
            try:
                step = np.linalg.solve(hess, -grad)
            except np.linalg.LinAlgError as e:
                raise NumericalError("Newton system is singular: %s" % e)
            decrement = -float(step @ grad)
            if decrement / 2.0 < 1e-10:
                break
            f0 = self._potential(blocks, x, t, weight)
            alpha = 1.0
            for _ in range(60):
                x_new = x + alpha * step[:n]
                t_new = t + alpha * step[n]
                if self._potential(blocks, x_new, t_new, weight) <= f0 - 0.25 * alpha * decrement:
                    x, t = x_new, t_new
                    break
                alpha *= 0.5
            else:
                break
        return x, t, iterations, iterations >= self.max_iter


def solve_feasibility(problem, tol=1e-9, max_iter=500, margin=DEFAULT_MARGIN, **kwargs):
    return BarrierSolver(tol=tol, max_iter=max_iter, margin=margin, **kwargs).solve(problem)
