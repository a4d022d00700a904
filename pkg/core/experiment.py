"""Monte-Carlo robustness runs over sampled uncertainties and their CSV files."""

import csv
import logging
import os
import re
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from core.errors import ConfigError
from core.errors import NumericalError
from core.evaluator import check_arg_condition
from core.model import Controller
from core.model import assemble_closed_loop
from core.model import realize_plant
from core.model import sample_uncertainty
from core.simulator import Trajectory
from core.simulator import simulate_closed_loop

logger = logging.getLogger(__name__)

CONVERGENCE_TOL = 0.01
FLOAT_FORMAT = "%.9f"

RobustnessSample = namedtuple("RobustnessSample", [
    "index", "delta_norm", "arg_stable", "min_arg", "final_norm", "diverged", "stable", "error"])


class RobustnessReport(object):

    def __init__(self, samples):
        self.samples = sorted(samples, key=lambda s: s.index)

    @property
    def n_samples(self):
        return len(self.samples)

    @property
    def stable_fraction(self):
        if not self.samples:
            return 0.0
        return sum(s.stable for s in self.samples) / float(len(self.samples))

    @property
    def worst_final_norm(self):
        if not self.samples:
            return 0.0
        return max(np.inf if (s.diverged or s.error) else s.final_norm for s in self.samples)

    def __str__(self):
        return "%d samples, stable fraction %.3f, worst final |x| %.4g" % (
            self.n_samples, self.stable_fraction, self.worst_final_norm)


def _evaluate_sample(plant, ctrl, index, seed, scale, x0, xc0, T, h):
    try:
        delta = sample_uncertainty(plant.unc, seed, scale, index=index)
        a_psi = assemble_closed_loop(realize_plant(plant, delta), ctrl).A_psi
        verdict = check_arg_condition(a_psi, plant.q)
        traj = simulate_closed_loop(plant, delta, ctrl, x0, xc0, T, h)
    except NumericalError as e:
        logger.debug("sample %d failed: %s", index, e)
        return RobustnessSample(index, np.nan, False, np.nan, np.nan, False, False, str(e))
    stable = verdict.stable and traj.is_convergent(CONVERGENCE_TOL)
    logger.debug("sample %d: |Delta| %.3g, %s, final |x| %.3g", index,
                 np.linalg.norm(delta), verdict, traj.final_norm)
    return RobustnessSample(index, float(np.linalg.norm(delta)), verdict.stable, verdict.min_arg,
                            traj.final_norm, traj.diverged, stable, "")


def run_monte_carlo(plant, ctrl, n_samples, seed, scale=1.0, x0=None, xc0=None, T=20.0, h=1e-3,
                    workers=1):
    """Sample i uses stream i of ``seed``; the report keeps sample order.

    ``workers > 1`` evaluates samples on a thread pool. Results are identical
    to the serial run; no speed-up is promised.
    """
    if plant.unc is None:
        raise ConfigError("robustness runs need an uncertainty model")
    if n_samples < 0:
        raise ConfigError("n_samples must be non-negative")
    x0 = np.zeros(plant.n) if x0 is None else x0

    def evaluate(i):
        return _evaluate_sample(plant, ctrl, i, seed, scale, x0, xc0, T, h)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            samples = list(pool.map(evaluate, range(n_samples)))
    else:
        samples = [evaluate(i) for i in range(n_samples)]
    report = RobustnessReport(samples)
    logger.info("monte carlo (seed %d, scale %g): %s", seed, scale, report)
    return report


def open_loop_showcase(plant, n_systems, seed, x0, T=20.0, h=1e-3):
    """Sampled plants simulated with u = 0."""
    zero = Controller.zero(plant.m, plant.p)
    runs = []
    for i in range(n_systems):
        delta = None if plant.unc is None else sample_uncertainty(plant.unc, seed, index=i)
        runs.append(simulate_closed_loop(plant, delta, zero, x0, None, T, h))
    return runs


def trajectory_path(out_dir, run_name, index):
    return os.path.join(out_dir, "%s_traj_%d.csv" % (run_name, index))


def report_path(out_dir, run_name):
    return os.path.join(out_dir, "%s_report.csv" % run_name)


def _trajectory_header(traj):
    names = ["t"]
    for prefix, arr in (("x", traj.x), ("xc", traj.xc), ("u", traj.u), ("y", traj.y)):
        names += ["%s%d" % (prefix, i + 1) for i in range(arr.shape[1])]
    return names


def _fmt(value):
    return FLOAT_FORMAT % value


def write_csv(obj, path):
    """Write a Trajectory or a RobustnessReport."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        if isinstance(obj, Trajectory):
            writer.writerow(_trajectory_header(obj))
            data = np.hstack([obj.t[:, None], obj.x, obj.xc, obj.u, obj.y])
            for row in data:
                writer.writerow([_fmt(v) for v in row])
        elif isinstance(obj, RobustnessReport):
            writer.writerow(RobustnessSample._fields)
            for s in obj.samples:
                writer.writerow([s.index, _fmt(s.delta_norm), int(s.arg_stable), _fmt(s.min_arg),
                                 _fmt(s.final_norm), int(s.diverged), int(s.stable), s.error])
            writer.writerow(["aggregate", "", "", "", _fmt(obj.worst_final_norm), "",
                             _fmt(obj.stable_fraction), ""])
        else:
            raise ConfigError("cannot write %s as CSV" % type(obj).__name__)
    logger.debug("wrote %s", path)


_COLUMN_RE = re.compile(r"^(xc|x|u|y)(\d+)$")


def read_trajectory(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0][0] != "t":
        raise ConfigError("%s is not a trajectory file" % path)
    header = rows[0]
    data = np.array(rows[1:], dtype=float).reshape(-1, len(header))
    groups = {"x": [], "xc": [], "u": [], "y": []}
    for col, name in enumerate(header[1:], 1):
        match = _COLUMN_RE.match(name)
        if not match:
            raise ConfigError("%s: unknown column %r" % (path, name))
        groups[match.group(1)].append(col)
    return Trajectory(data[:, 0], *(data[:, groups[k]] for k in ("x", "xc", "u", "y")))


def read_report(path):
    """Per-sample rows and the aggregate footer (stable fraction, worst norm)."""
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[-1][0] != "aggregate":
        raise ConfigError("%s is not a robustness report" % path)
    samples = [RobustnessSample(int(r[0]), float(r[1]), r[2] == "1", float(r[3]), float(r[4]),
                                r[5] == "1", r[6] == "1", r[7]) for r in rows[1:-1]]
    footer = rows[-1]
    return samples, float(footer[6]), float(footer[4])
