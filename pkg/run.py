"""Command-line entry point.

    python run.py <command> <config.json> [options]

Commands: validate, synth, analyze, simulate, robustness, showcase, sweep.
Exit codes: 0 success, 2 infeasible/unstable verdict, 3 configuration
error, 4 numerical failure. Set FOLMI_LOG=DEBUG|INFO|WARNING|ERROR for
logging on stderr.
"""

import argparse
import logging
import os
import sys

import numpy as np

from core.errors import ConfigError
from core.errors import FolmiError
from core.evaluator import check_arg_condition
from core.experiment import open_loop_showcase
from core.experiment import report_path
from core.experiment import run_monte_carlo
from core.experiment import trajectory_path
from core.experiment import write_csv
from core.model import Controller
from core.model import assemble_closed_loop
from core.model import validate
from core.phiexpr import estimate_lipschitz
from core.simulator import simulate_closed_loop
from core.synthesis import MODES
from core.synthesis import XI_CONVENTIONS
from core.synthesis import synthesize
from core.synthesis import verify_fractional
from core.synthesis import verify_theorem1
from utils.config import load_config
from utils.config import load_controller
from utils.config import save_controller
from utils.seeder import check_seed
from utils.timer import Timer

logger = logging.getLogger("folmi")

COMMANDS = ("validate", "synth", "analyze", "simulate", "robustness", "showcase", "sweep")
OK, VERDICT_FAILED = 0, 2
LIPSCHITZ_SAMPLES = 2000


def setup_logging():
    name = os.environ.get("FOLMI_LOG", "WARNING").upper()
    level = getattr(logging, name, None)
    if name not in ("DEBUG", "INFO", "WARNING", "ERROR"):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def format_matrix(name, mat):
    mat = np.atleast_2d(mat)
    if mat.size == 0:
        return "%s = []" % name
    rows = ["[" + " ".join("%10.4f" % v for v in row) + "]" for row in mat]
    pad = " " * (len(name) + 3)
    return "%s = %s" % (name, ("\n" + pad).join(rows))


def print_controller(ctrl):
    for key in ("Ac", "Bc", "Cc", "Dc"):
        print(format_matrix(key, getattr(ctrl, key)))


def _controller(cfg, opts):
    path = opts.get("controller")
    if path is None:
        raise ConfigError("this command needs --controller <path> (or --controller none)")
    if path == "none":
        return Controller.zero(cfg.plant.m, cfg.plant.p)
    return load_controller(path, cfg.plant)


def _ensure_out(cfg):
    os.makedirs(cfg.out_dir, exist_ok=True)
    return cfg.out_dir


def cmd_validate(cfg, opts):
    plant = cfg.plant
    report = validate(plant)
    print(report)
    box = np.tile([-1.0, 1.0], (plant.n + plant.m, 1))
    seed = cfg.seed if cfg.seed is not None else 0
    xi_hat = estimate_lipschitz(plant.phi, box, LIPSCHITZ_SAMPLES, seed)
    note = "" if xi_hat <= plant.xi else "  (exceeds configured xi = %g)" % plant.xi
    print("sampled Lipschitz constant on [-1, 1]: %.4f%s" % (xi_hat, note))
    return OK if report.ok else VERDICT_FAILED


def _synth_one(cfg, n_c, opts):
    dump = opts.get("dump_sdpa")
    with Timer("synth n_c=%d" % n_c):
        if dump:
            with open(dump, "w") as f:
                return synthesize(cfg.plant, n_c, cfg.mode, cfg.xi_convention,
                                  margin=cfg.margin, sdpa_stream=f)
        return synthesize(cfg.plant, n_c, cfg.mode, cfg.xi_convention, margin=cfg.margin)


def cmd_synth(cfg, opts):
    result = _synth_one(cfg, cfg.n_c, opts)
    sol = result.feasibility
    print("mode %s, n_c = %d: LMI %s (t = %.4g, %d iterations)"
          % (cfg.mode, cfg.n_c, sol.verdict, sol.t, sol.iterations))
    if result.controller is None:
        return VERDICT_FAILED
    print_controller(result.controller)
    print("recovery residuals: " + ", ".join("%s %.3e" % kv for kv in sorted(result.residuals.items())))
    print("nominal closed loop: %s" % (result.nominal,))
    print("robust analysis: %s" % result.analysis.verdict)
    path = os.path.join(_ensure_out(cfg), "%s_nc%d_controller.json" % (cfg.name, cfg.n_c))
    save_controller(result.controller, path)
    print("controller written to %s" % path)
    print("accepted" if result.accepted else "rejected")
    return OK if result.accepted else VERDICT_FAILED


def cmd_analyze(cfg, opts):
    plant = cfg.plant
    ctrl = _controller(cfg, opts)
    verdict = check_arg_condition(assemble_closed_loop(plant, ctrl).A_psi, plant.q)
    print("nominal closed loop: %s" % (verdict,))
    analysis = verify_theorem1(plant, ctrl, xi_convention=cfg.xi_convention, margin=cfg.margin)
    print("robust analysis: %s (t = %.4g)" % (analysis.verdict, analysis.t))
    if plant.phi.is_zero() and 0.0 < plant.q < 1.0:
        print("sector analysis: %s" % verify_fractional(plant, ctrl, cfg.margin).verdict)
    return OK if verdict.stable and analysis.feasible else VERDICT_FAILED


def _describe(traj):
    settle = traj.settling_time()
    return "final |x| %.4g, peak |x| %.4g, settling time %s%s" % (
        traj.final_norm, traj.peak_norm, "-" if settle is None else "%.3f" % settle,
        ", diverged" if traj.diverged else "")


def cmd_simulate(cfg, opts):
    ctrl = _controller(cfg, opts)
    traj = simulate_closed_loop(cfg.plant, None, ctrl, cfg.x0, cfg.xc0, cfg.T, cfg.h)
    path = trajectory_path(_ensure_out(cfg), cfg.name, 0)
    write_csv(traj, path)
    print("%s (t = %.3f)" % (_describe(traj), traj.t[-1]))
    print("trajectory written to %s" % path)
    if not traj.is_convergent():
        print("not convergent" + (": integration diverged" if traj.diverged else ""))
        return VERDICT_FAILED
    return OK


def _seed(cfg):
    if cfg.seed is None:
        raise ConfigError("a seed is required (robustness.seed or --seed)")
    return cfg.seed


def cmd_robustness(cfg, opts):
    ctrl = _controller(cfg, opts)
    with Timer("monte carlo"):
        report = run_monte_carlo(cfg.plant, ctrl, cfg.samples, _seed(cfg), cfg.scale, cfg.x0,
                                 cfg.xc0, cfg.T, cfg.h, cfg.workers)
    path = report_path(_ensure_out(cfg), cfg.name)
    write_csv(report, path)
    print(report)
    print("report written to %s" % path)
    return OK if report.stable_fraction == 1.0 else VERDICT_FAILED


def cmd_showcase(cfg, opts):
    runs = open_loop_showcase(cfg.plant, opts.get("systems") or 5, _seed(cfg), cfg.x0, cfg.T, cfg.h)
    out = _ensure_out(cfg)
    for i, traj in enumerate(runs):
        write_csv(traj, trajectory_path(out, cfg.name + "_open", i))
        print("system %d: %s -> %s" % (i, _describe(traj),
                                        "convergent" if traj.is_convergent() else "non-convergent"))
    return OK


def cmd_sweep(cfg, opts):
    orders = opts.get("orders") or [0, 1, 2]
    print("%4s  %-10s %-9s %12s %10s %s" % ("n_c", "lmi", "accepted", "final |x|", "settling", "Dc"))
    all_ok = True
    for n_c in orders:
        result = _synth_one(cfg, n_c, {})
        accepted = result.accepted
        all_ok = all_ok and accepted
        final, settle, dc = "-", "-", "-"
        if result.controller is not None:
            traj = simulate_closed_loop(cfg.plant, None, result.controller, cfg.x0, cfg.xc0,
                                        cfg.T, cfg.h)
            final = "%.3e" % traj.final_norm
            s = traj.settling_time()
            settle = "-" if s is None else "%.3f" % s
            dc = np.array2string(result.controller.Dc, precision=4)
        print("%4d  %-10s %-9s %12s %10s %s" % (n_c, result.feasibility.verdict,
                                                 "yes" if accepted else "no", final, settle, dc))
    return OK if all_ok else VERDICT_FAILED


HANDLERS = {
    "validate": cmd_validate,
    "synth": cmd_synth,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "robustness": cmd_robustness,
    "showcase": cmd_showcase,
    "sweep": cmd_sweep,
}


def run(command, cfg, **opts):
    """Dispatch ``command`` on a loaded config; returns the exit code."""
    if command not in HANDLERS:
        raise ConfigError("unknown command %r" % command)
    return HANDLERS[command](cfg, opts)


class _Parser(argparse.ArgumentParser):

    def error(self, message):
        raise ConfigError(message)


def _orders(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("orders must be comma-separated integers")


def build_parser():
    p = _Parser(description="Fixed-order output-feedback synthesis for fractional-order plants.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("config", help="JSON run configuration")
    p.add_argument("--nc", type=int, help="controller order")
    p.add_argument("--controller", help="controller JSON file, or 'none' for u = 0")
    p.add_argument("--seed", help="unsigned 64-bit seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--xi-convention", choices=XI_CONVENTIONS, dest="xi_convention")
    p.add_argument("--dump-sdpa", dest="dump_sdpa", help="write the synthesis LMI in SDPA format")
    p.add_argument("--orders", type=_orders, help="controller orders for sweep, e.g. 0,1,2")
    p.add_argument("--systems", type=int, help="number of sampled plants for showcase")
    return p


def main(argv=None):
    setup_logging()
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config)
        if args.nc is not None:
            if args.nc < 0:
                raise ConfigError("--nc must be non-negative")
            cfg.n_c = args.nc
        if args.mode:
            cfg.mode = args.mode
        if args.xi_convention:
            cfg.xi_convention = args.xi_convention
        if args.seed is not None:
            try:
                cfg.seed = check_seed(args.seed)
            except ValueError as e:
                raise ConfigError("--seed: %s" % e)
        if args.out:
            cfg.out_dir = args.out
        return run(args.command, cfg, controller=args.controller, dump_sdpa=args.dump_sdpa,
                   orders=args.orders, systems=args.systems)
    except FolmiError as e:
        logger.error("%s", e)
        print("error: %s" % e, file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print("error: %s" % e, file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
