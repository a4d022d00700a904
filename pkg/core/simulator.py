"""Caputo fractional dynamics: Mittag-Leffler oracle and closed-loop simulation."""

import logging
from collections import namedtuple

import mpmath
import numpy as np
from scipy.special import gamma
from scipy.special import gammaln

from core.errors import ConfigError
from core.errors import NumericalError
from core.model import assemble_closed_loop
from core.model import realize_plant

logger = logging.getLogger(__name__)

ML_REL_TOL = 1e-16
ML_MAX_TERMS = 20000
ML_MAX_DPS = 2000
# above this the float series loses everything to cancellation
ML_FLOAT_RANGE = 10.0
DIVERGENCE_NORM = 1e8


def mittag_leffler(q, z):
    """E_q(z) = sum_k z^k / Gamma(q k + 1) for 0 < q <= 1 and real |z| <= 50."""
    if not 0.0 < q <= 1.0:
        raise ConfigError("Mittag-Leffler order %g outside (0, 1]" % q)
    z = float(z)
    if abs(z) > 50.0:
        raise ConfigError("Mittag-Leffler argument %g outside [-50, 50]" % z)
    if z == 0.0:
        return 1.0
    # magnitude of the largest term is about exp(|z|^(1/q))
    peak = abs(z) ** (1.0 / q)
    if peak <= ML_FLOAT_RANGE:
        return _ml_float(q, z)
    dps = int(30 + peak / np.log(10.0))
    if dps > ML_MAX_DPS:
        raise NumericalError("Mittag-Leffler series for q=%g, z=%g needs %d digits" % (q, z, dps))
    return _ml_mpmath(q, z, dps)


def _ml_float(q, z):
    total, prev = 0.0, np.inf
    log_abs, sign = np.log(abs(z)), np.sign(z)
    for k in range(ML_MAX_TERMS):
        term = (sign ** k) * np.exp(k * log_abs - gammaln(q * k + 1.0))
        total += term
        if abs(term) < ML_REL_TOL * abs(total) and abs(term) <= prev:
            return float(total)
        prev = abs(term)
    raise NumericalError("Mittag-Leffler series did not converge in %d terms" % ML_MAX_TERMS)


def _ml_mpmath(q, z, dps):
    with mpmath.workdps(dps):
        zq, qq = mpmath.mpf(z), mpmath.mpf(q)
        total, prev = mpmath.mpf(0), mpmath.inf
        for k in range(ML_MAX_TERMS):
            term = zq ** k * mpmath.rgamma(qq * k + 1)
            total += term
            if abs(term) < ML_REL_TOL * abs(total) and abs(term) <= prev:
                return float(total)
            prev = abs(term)
    raise NumericalError("Mittag-Leffler series did not converge in %d terms" % ML_MAX_TERMS)


CaputoSolution = namedtuple("CaputoSolution", ["t", "x", "diverged"])


def integrate_caputo(f, q, x0, T, h):
    """Adams-Bashforth-Moulton predictor-corrector for D^q x = f(t, x).

    One corrector pass per step over the full history. A non-finite state or
    a norm above DIVERGENCE_NORM ends the run early with ``diverged`` set;
    the returned samples stop at the last finite state.
    """
    if not 0.0 < q <= 1.0:
        raise ConfigError("fractional order %g outside (0, 1]" % q)
    if h <= 0.0 or T < h:
        raise ConfigError("need h > 0 and T >= h (got h=%g, T=%g)" % (h, T))
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    steps = int(round(T / h))
    t = h * np.arange(steps + 1)
    k = np.arange(steps + 2, dtype=float)
    b = (k[1:] ** q - k[:-1] ** q)[:steps]
    c = (k[2:] ** (q + 1) + k[:-2] ** (q + 1) - 2.0 * k[1:-1] ** (q + 1))[:steps]
    pred_scale = h ** q / gamma(q + 1.0)
    corr_scale = h ** q / gamma(q + 2.0)

    xs = np.empty((steps + 1, x0.size))
    fs = np.empty((steps + 1, x0.size))
    xs[0] = x0
    fs[0] = f(t[0], x0)
    for n in range(steps):
        x_pred = x0 + pred_scale * (b[n::-1] @ fs[:n + 1])
        f_pred = f(t[n + 1], x_pred)
        a0 = n ** (q + 1) - (n - q) * (n + 1) ** q
        history = a0 * fs[0]
        if n:
            history = history + c[n - 1::-1] @ fs[1:n + 1]
        x_new = x0 + corr_scale * (f_pred + history)
        if not np.all(np.isfinite(x_new)) or np.linalg.norm(x_new) > DIVERGENCE_NORM:
            logger.warning("integration diverged at t=%.4g (step %d of %d)", t[n + 1], n + 1, steps)
            return CaputoSolution(t[:n + 1], xs[:n + 1], True)
        xs[n + 1] = x_new
        fs[n + 1] = f(t[n + 1], x_new)
    return CaputoSolution(t, xs, False)


class Trajectory(object):
    """Sampled closed-loop run: plant states, controller states, input, output."""

    def __init__(self, t, x, xc, u, y, diverged=False):
        self.t = np.asarray(t, dtype=float)
        self.x = np.asarray(x, dtype=float)
        self.xc = np.asarray(xc, dtype=float)
        self.u = np.asarray(u, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.diverged = bool(diverged)
        length = len(self.t)
        if any(len(a) != length for a in (self.x, self.xc, self.u, self.y)):
            raise ConfigError("trajectory arrays do not share the time grid")

    def __len__(self):
        return len(self.t)

    @property
    def norms(self):
        return np.linalg.norm(self.x, axis=1)

    @property
    def final_norm(self):
        return float(self.norms[-1]) if len(self) else np.nan

    @property
    def peak_norm(self):
        return float(np.max(self.norms)) if len(self) else np.nan

    def settling_time(self, tol=0.02):
        """First time after which |x| stays within tol |x(0)|, None if never."""
        if self.diverged or not len(self):
            return None
        norms = self.norms
        bound = tol * norms[0]
        outside = np.nonzero(norms > bound)[0]
        if not outside.size:
            return 0.0
        last = outside[-1]
        return None if last == len(norms) - 1 else float(self.t[last + 1])

    def is_convergent(self, tol=0.01):
        """Finite run ending with |x(T)| < tol max(1, |x(0)|)."""
        if self.diverged or not len(self):
            return False
        return self.final_norm < tol * max(1.0, float(self.norms[0]))


def simulate_closed_loop(plant, delta, ctrl, x0, xc0=None, T=20.0, h=1e-3):
    """Integrate the closed loop of ``plant`` (perturbed by ``delta``) and ``ctrl``.

    ``delta`` may be None for the nominal plant. u = Cc xc + Dc C x is
    recomputed from the state at every evaluation of the vector field.
    """
    real = plant if delta is None else realize_plant(plant, delta)
    n, n_c = plant.n, ctrl.n_c
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    xc0 = np.zeros(n_c) if xc0 is None else np.asarray(xc0, dtype=float).reshape(-1)
    if x0.shape != (n,) or xc0.shape != (n_c,):
        raise ConfigError("initial states have lengths (%d, %d), expected (%d, %d)"
                          % (x0.size, xc0.size, n, n_c))
    a_psi = assemble_closed_loop(real, ctrl).A_psi
    gain = np.hstack([ctrl.Dc @ real.C, ctrl.Cc])
    phi = real.phi
    linear = phi.is_zero()

    def rhs(_, state):
        dx = a_psi @ state
        if not linear:
            dx[:n] += phi.eval(state[:n], gain @ state)
        return dx

    sol = integrate_caputo(rhs, plant.q, np.concatenate([x0, xc0]), T, h)
    xs = sol.x
    traj = Trajectory(sol.t, xs[:, :n], xs[:, n:], xs @ gain.T, xs[:, :n] @ real.C.T,
                      sol.diverged)
    logger.debug("simulated %d steps: final |x| %.3g, diverged=%s",
                 len(traj) - 1, traj.final_norm, traj.diverged)
    return traj
