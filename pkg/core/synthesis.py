"""Controller synthesis and analysis LMIs for uncertain fractional plants.

Synthesis works on the change of variables

    A_hat = Ac P_d,  B_hat = Bc C P_u,  C_hat = Cc P_d,  D_hat = Dc C P_u

with P = diag(P_u, P_d), which makes the closed-loop inequality linear.
Recovery inverts it with P_d^-1 and the pseudo-inverse of C P_u.

By default P_u is restricted to V_r P_u1 V_r^T + V_perp P_u2 V_perp^T, where
V_r spans the row space of C and V_perp its null space, and B_hat, D_hat are
restricted to act through V_r^T. C P_u then has the row space of V_r^T and
the pseudo-inverse recovery is exact even when C is rank deficient.
"""

import logging

import numpy as np
import scipy.linalg

from core.errors import ConfigError
from core.errors import NumericalError
from core.evaluator import check_arg_condition
from core.evaluator import rotate
from core.evaluator import sector_angle
from core.lmi import DEFAULT_MARGIN
from core.lmi import LmiProblem
from core.lmi import NEGDEF
from core.lmi import POSDEF
from core.lmi import VarSpace
from core.lmi import assemble_block
from core.lmi import hermitian_to_real
from core.matnum import min_eig
from core.matnum import pinv
from core.matnum import row_space_split
from core.matnum import sym
from core.model import Controller
from core.model import assemble_closed_loop
from core.optimizer import solve_feasibility

logger = logging.getLogger(__name__)

MODES = ("theorem2", "certain", "corollary1")
XI_CONVENTIONS = ("squared", "plain")


def lipschitz_weight(xi, convention="squared"):
    """Weight of tau I in the Lipschitz block: xi^2 (squared) or xi (plain)."""
    if convention not in XI_CONVENTIONS:
        raise ConfigError("xi_convention must be one of %s" % (XI_CONVENTIONS,))
    return xi ** 2 if convention == "squared" else xi


def _check_order(plant):
    if not 0.0 < plant.q < 1.0:
        raise ConfigError("fractional order q = %g outside (0, 1)" % plant.q)


def _check_nc(n_c):
    if int(n_c) != n_c or n_c < 0:
        raise ConfigError("controller order must be a non-negative integer, got %r" % n_c)
    return int(n_c)


class _Layout(object):
    """Decision variables of a synthesis problem and the expressions built on them."""

    def __init__(self, plant, n_c, aligned, hermitian, with_tau, with_mu):
        n, m = plant.n, plant.m
        if aligned:
            self.v_r, self.v_perp = row_space_split(plant.C)
        else:
            self.v_r, self.v_perp = np.eye(n), np.zeros((n, 0))
        r = self.v_r.shape[1]
        self.n_c = n_c
        self.hermitian = hermitian
        kind = "hermitian" if hermitian else "symmetric"
        self.names = ({"A": "T1", "B": "T2", "C": "T3", "D": "T4"} if hermitian else
                      {"A": "A_hat", "B": "B_hat", "C": "C_hat", "D": "D_hat"})
        space = VarSpace()
        space.declare("P_u1", kind, r)
        space.declare("P_u2", kind, n - r)
        if n_c:
            space.declare("P_d", kind, n_c)
            space.declare(self.names["A"], "full", (n_c, n_c))
            space.declare(self.names["B"], "full", (n_c, r))
            space.declare(self.names["C"], "full", (m, n_c))
        space.declare(self.names["D"], "full", (m, r))
        if with_tau:
            space.declare("tau", "scalar")
        if with_mu:
            space.declare("mu", "scalar")
        self.space = space

    def var(self, name):
        return self.space.var(name)

    def p_u(self):
        return (self.v_r @ self.var("P_u1") @ self.v_r.T
                + self.v_perp @ self.var("P_u2") @ self.v_perp.T)

    def p_d(self):
        return self.var("P_d")

    def a_hat(self):
        return self.var(self.names["A"])

    def b_hat(self):
        return self.var(self.names["B"]) @ self.v_r.T

    def c_hat(self):
        return self.var(self.names["C"])

    def d_hat(self):
        return self.var(self.names["D"]) @ self.v_r.T


def _robust_block(inner, pi_m, pi_n, mu, J):
    m0 = J.shape[0]
    return assemble_block([[inner, pi_m, pi_n],
                           [None, -mu.eye(m0), mu.eye(m0)],
                           [None, None, -mu.eye(m0) - sym(J)]])


def _column(parts):
    return assemble_block([[p] for p in parts], symmetric=False)


def _build_lyapunov(plant, n_c, robust, xi_convention, aligned, margin):
    _check_order(plant)
    n_c = _check_nc(n_c)
    n = plant.n
    A, B = plant.A, plant.B
    lay = _Layout(plant, n_c, aligned, hermitian=False, with_tau=True, with_mu=robust)
    p_u = lay.p_u()
    d_hat = lay.d_hat()
    tau = lay.var("tau")
    w = lipschitz_weight(plant.xi, xi_convention)

    l11 = A @ p_u + p_u @ A.T + B @ d_hat + (B @ d_hat).T
    if n_c:
        c_hat = lay.c_hat()
        a_hat = lay.a_hat()
        upsilon = assemble_block([[l11, B @ c_hat + lay.b_hat().T],
                                  [None, a_hat + a_hat.T]])
    else:
        upsilon = l11
    upsilon = upsilon + (tau * w).eye(n + n_c)
    # P E with E = [I; 0] picks the plant-state columns of P
    p_e = _column([p_u, np.zeros((n_c, n))])
    lam11 = assemble_block([[upsilon, p_e], [None, -tau.eye(n)]])

    mode = "theorem2" if robust else "certain"
    problem = LmiProblem(lay.space, name="%s[n_c=%d]" % (mode, n_c))
    if robust:
        unc = plant.unc
        mu = lay.var("mu")
        pi_m = np.vstack([unc.M, np.zeros((n_c + n, unc.m0))])
        q1 = unc.N1 @ p_u + unc.N2 @ d_hat
        parts = [q1.T]
        if n_c:
            parts.append((unc.N2 @ lay.c_hat()).T)
        parts.append(np.zeros((n, unc.m0)))
        problem.add(_robust_block(lam11, pi_m, _column(parts), mu, unc.J), NEGDEF, margin, "lmi")
        problem.add_lower_bound(mu, margin, "mu")
    else:
        problem.add(lam11, NEGDEF, margin, "lmi")
    problem.add(p_u, POSDEF, margin, "P_u")
    if n_c:
        problem.add(lay.p_d(), POSDEF, margin, "P_d")
    problem.add_lower_bound(tau, margin, "tau")
    problem.tags.update(mode=mode, n_c=n_c, layout=lay, q=plant.q)
    logger.debug("built %s: %d scalars, main block %s", problem.name, problem.nvars,
                 problem.constraints[0].expr.shape)
    return problem


def build_theorem2(plant, n_c, xi_convention="squared", aligned=True, margin=DEFAULT_MARGIN):
    """Robust synthesis LMI; main block of size 2n + n_c + 2 m0.

    The default ``aligned=True`` splits P_u along the output range of C and
    restricts B_hat and D_hat to match, which needs fewer decision variables.
    ``aligned=False`` keeps the full symmetric P_u with full B_hat and D_hat
    (12 variables instead of 9 for fixtures/example1.json at n_c=1).
    """
    if plant.unc is None:
        raise ConfigError("robust synthesis needs an uncertainty model")
    return _build_lyapunov(plant, n_c, True, xi_convention, aligned, margin)


def build_certain(plant, n_c, xi_convention="squared", aligned=True, margin=DEFAULT_MARGIN):
    """Synthesis LMI with the uncertainty dropped (M = 0)."""
    return _build_lyapunov(plant, n_c, False, xi_convention, aligned, margin)


def build_corollary1(plant, n_c, aligned=True, margin=DEFAULT_MARGIN):
    """Complex-variable synthesis for linear plants (experimental).

    P_u and P_d are Hermitian and enter through Q = r P + conj(r P) with
    r = exp(i theta), theta = (1 - q) pi / 2, so the certificate is the
    sector condition rather than a Lyapunov decrease.
    """
    if not plant.phi.is_zero():
        raise ConfigError("the complex-variable builder needs a linear plant (phi = 0)")
    _check_order(plant)
    n_c = _check_nc(n_c)
    A, B = plant.A, plant.B
    robust = plant.unc is not None
    lay = _Layout(plant, n_c, aligned, hermitian=True, with_tau=False, with_mu=robust)
    theta = sector_angle(plant.q)
    q_u = rotate(lay.p_u(), theta)
    t4 = lay.d_hat()
    l11 = A @ q_u + q_u.T @ A.T + B @ t4 + (B @ t4).T
    if n_c:
        t1, t3 = lay.a_hat(), lay.c_hat()
        lam = assemble_block([[l11, B @ t3 + lay.b_hat().T], [None, t1 + t1.T]])
    else:
        lam = l11
    problem = LmiProblem(lay.space, name="corollary1[n_c=%d]" % n_c)
    if robust:
        unc = plant.unc
        mu = lay.var("mu")
        pi_m = np.vstack([unc.M, np.zeros((n_c, unc.m0))])
        parts = [(unc.N1 @ q_u + unc.N2 @ t4).T]
        if n_c:
            parts.append((unc.N2 @ lay.c_hat()).T)
        problem.add(_robust_block(lam, pi_m, _column(parts), mu, unc.J), NEGDEF, margin, "lmi")
        problem.add_lower_bound(mu, margin, "mu")
    else:
        problem.add(lam, NEGDEF, margin, "lmi")
    for name in ("P_u1", "P_u2", "P_d"):
        if name in lay.space and lay.space[name].shape[0] > 0:
            problem.add(hermitian_to_real(lay.var(name)), POSDEF, margin, name)
    problem.tags.update(mode="corollary1", n_c=n_c, layout=lay, q=plant.q, theta=theta)
    return problem


class SynthesisResult(object):
    """Recovered controller with the certificate it came from and its checks."""

    def __init__(self, feasibility, controller=None, P_u=None, P_d=None, tau=None, mu=None,
                 residuals=None, nominal=None, analysis=None, mode=None):
        self.feasibility = feasibility
        self.controller = controller
        self.P_u = P_u
        self.P_d = P_d
        self.tau = tau
        self.mu = mu
        self.residuals = residuals or {}
        self.nominal = nominal
        self.analysis = analysis
        self.mode = mode

    @property
    def accepted(self):
        return (self.feasibility.feasible and self.controller is not None
                and self.nominal is not None and self.nominal.stable
                and self.analysis is not None and self.analysis.feasible)

    @property
    def max_residual(self):
        return max(self.residuals.values()) if self.residuals else 0.0


def recover_controller(sol, plant, n_c=None):
    """Controller matrices from a feasible synthesis assignment."""
    problem = sol.problem
    if not sol.feasible or sol.assignment is None or problem is None:
        raise ConfigError("controller recovery needs a feasible synthesis assignment")
    lay = problem.tags["layout"]
    if n_c is not None and n_c != lay.n_c:
        raise ConfigError("assignment is for n_c = %d, not %d" % (lay.n_c, n_c))
    x = sol.assignment
    mode = problem.tags["mode"]
    if lay.hermitian:
        theta = problem.tags["theta"]
        q_u = rotate(lay.p_u(), theta).value(x)
        p_u = lay.p_u().value(x)
    else:
        q_u = p_u = lay.p_u().value(x)
    c_pu = plant.C @ q_u
    c_pu_pinv = pinv(c_pu)
    d_hat = lay.d_hat().value(x)
    dc = d_hat @ c_pu_pinv
    residuals = {"D": float(np.linalg.norm(dc @ c_pu - d_hat))}
    p_d = None
    if lay.n_c:
        p_d = lay.p_d().value(x)
        if min_eig(p_d) <= 0.0:
            raise NumericalError("P_d is not positive definite at the assignment")
        q_d = rotate(lay.p_d(), problem.tags["theta"]).value(x) if lay.hermitian else p_d
        try:
            q_d_inv = scipy.linalg.inv(q_d)
        except scipy.linalg.LinAlgError as e:
            raise NumericalError("cannot invert P_d: %s" % e)
        b_hat = lay.b_hat().value(x)
        ac = lay.a_hat().value(x) @ q_d_inv
        cc = lay.c_hat().value(x) @ q_d_inv
        bc = b_hat @ c_pu_pinv
        residuals["B"] = float(np.linalg.norm(bc @ c_pu - b_hat))
        ctrl = Controller(ac, bc, cc, dc)
    else:
        ctrl = Controller.static(dc)
    nominal = check_arg_condition(assemble_closed_loop(plant, ctrl).A_psi, plant.q)
    scalars = {k: float(lay.var(k).value(x)[0, 0]) for k in ("tau", "mu") if k in lay.space}
    logger.info("recovered n_c=%d controller (%s): residuals %s, nominal %s",
                lay.n_c, mode, {k: "%.2e" % v for k, v in residuals.items()}, nominal)
    return SynthesisResult(sol, ctrl, p_u, p_d, scalars.get("tau"), scalars.get("mu"),
                           residuals, nominal, mode=mode)


def verify_theorem1(plant, ctrl, certain=False, xi_convention="squared", margin=DEFAULT_MARGIN):
    """Robust analysis LMI for a fixed controller (linear in P, tau, mu)."""
    cl = assemble_closed_loop(plant, ctrl)
    n, n_c = plant.n, ctrl.n_c
    size = n + n_c
    robust = not certain and plant.unc is not None
    space = VarSpace()
    space.declare("P", "symmetric", size)
    space.declare("tau", "scalar")
    if robust:
        space.declare("mu", "scalar")
    p = space.var("P")
    tau = space.var("tau")
    w = lipschitz_weight(plant.xi, xi_convention)
    p_a = p @ cl.A_psi
    e = np.vstack([np.eye(n), np.zeros((n_c, n))])
    lam = assemble_block([[p_a + p_a.T + (tau * w).eye(size), p @ e],
                          [None, -tau.eye(n)]])
    problem = LmiProblem(space, name="analysis[n_c=%d]" % n_c)
    if robust:
        m0 = plant.unc.m0
        mu = space.var("mu")
        pi_m = _column([p @ cl.Mtilde, np.zeros((n, m0))])
        pi_n = np.vstack([cl.Ntilde.T, np.zeros((n, m0))])
        problem.add(_robust_block(lam, pi_m, pi_n, mu, plant.unc.J), NEGDEF, margin, "lmi")
    else:
        problem.add(lam, NEGDEF, margin, "lmi")
    problem.add(p, POSDEF, margin, "P")
    problem.add_lower_bound(tau, margin, "tau")
    if robust:
        problem.add_lower_bound(space.var("mu"), margin, "mu")
    return solve_feasibility(problem, margin=margin)


def verify_fractional(plant, ctrl, margin=DEFAULT_MARGIN):
    """Sector-form robust analysis for a fixed controller on a linear plant."""
    if not plant.phi.is_zero():
        raise ConfigError("sector analysis needs a linear plant (phi = 0)")
    _check_order(plant)
    cl = assemble_closed_loop(plant, ctrl)
    size = plant.n + ctrl.n_c
    robust = plant.unc is not None
    space = VarSpace()
    space.declare("P", "hermitian", size)
    if robust:
        space.declare("mu", "scalar")
    p = space.var("P")
    q_mat = rotate(p, sector_angle(plant.q))
    lyap = cl.A_psi @ q_mat
    lam = lyap + lyap.T
    problem = LmiProblem(space, name="sector-analysis[n_c=%d]" % ctrl.n_c)
    if robust:
        mu = space.var("mu")
        problem.add(_robust_block(lam, cl.Mtilde, (cl.Ntilde @ q_mat).T, mu, plant.unc.J),
                    NEGDEF, margin, "lmi")
        problem.add_lower_bound(mu, margin, "mu")
    else:
        problem.add(lam, NEGDEF, margin, "lmi")
    problem.add(hermitian_to_real(p), POSDEF, margin, "P")
    return solve_feasibility(problem, margin=margin)


def build(plant, n_c, mode="theorem2", xi_convention="squared", aligned=True,
          margin=DEFAULT_MARGIN):
    if mode == "theorem2":
        return build_theorem2(plant, n_c, xi_convention, aligned, margin)
    if mode == "certain":
        return build_certain(plant, n_c, xi_convention, aligned, margin)
    if mode == "corollary1":
        return build_corollary1(plant, n_c, aligned, margin)
    raise ConfigError("unknown synthesis mode %r (expected one of %s)" % (mode, MODES))


def synthesize(plant, n_c, mode="theorem2", xi_convention="squared", aligned=True,
               margin=DEFAULT_MARGIN, sdpa_stream=None):
    """Build, solve, recover and run the a-posteriori checks.

    ``sdpa_stream``, when given, receives the synthesis problem in SDPA form
    before it is solved.
    """
    problem = build(plant, n_c, mode, xi_convention, aligned, margin)
    if sdpa_stream is not None:
        problem.dump_sdpa(sdpa_stream)
    sol = solve_feasibility(problem, margin=margin)
    if not sol.feasible:
        return SynthesisResult(sol, mode=mode)
    result = recover_controller(sol, plant)
    if mode == "corollary1":
        result.analysis = verify_fractional(plant, result.controller, margin)
    else:
        result.analysis = verify_theorem1(plant, result.controller, certain=(mode == "certain"),
                                          xi_convention=xi_convention, margin=margin)
    logger.info("synthesis %s n_c=%d: analysis %s, accepted=%s", mode, n_c,
                result.analysis.verdict, result.accepted)
    return result
