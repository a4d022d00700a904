"""JSON run configuration and controller files."""

import json
import logging
import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

from core.errors import ConfigError
from core.model import Controller
from core.model import Plant
from core.model import UncertaintyModel
from core.phiexpr import parse
from core.synthesis import MODES
from core.synthesis import XI_CONVENTIONS
from utils.seeder import check_seed

logger = logging.getLogger(__name__)


@dataclass
class RunConfig:
    name: str
    plant: Plant
    x0: np.ndarray
    scale: float = 1.0
    mode: str = "theorem2"
    n_c: int = 0
    margin: float = 1e-6
    xi_convention: str = "squared"
    T: float = 20.0
    h: float = 1e-3
    xc0: Optional[np.ndarray] = None
    samples: int = 50
    seed: Optional[int] = None
    workers: int = 1
    out_dir: str = "out"
    path: Optional[str] = None


class _Source(object):
    """Raw config text, used to point errors at the line of a key."""

    def __init__(self, path, text):
        self.path = path
        self.text = text

    def line_of(self, key):
        match = re.search(r'"%s"\s*:' % re.escape(key), self.text)
        return self.text.count("\n", 0, match.start()) + 1 if match else None

    def error(self, key, message):
        line = self.line_of(key) if key else None
        where = "%s:%d: " % (self.path, line) if line else "%s: " % self.path
        return ConfigError(where + message)

    def wrap(self, err):
        # shape errors name the offending matrix first ("B has 3 rows ...")
        key = str(err).split(" ", 1)[0]
        return self.error(key, str(err))


def _read_json(path):
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ConfigError("cannot read %s: %s" % (path, e))
    try:
        return json.loads(text), _Source(path, text)
    except json.JSONDecodeError as e:
        raise ConfigError("%s:%d: %s" % (path, e.lineno, e.msg))


def _section(data, key, src, required=False):
    value = data.get(key)
    if value is None:
        if required:
            raise src.error(None, "missing section %r" % key)
        return {}
    if not isinstance(value, dict):
        raise src.error(key, "section %r must be an object" % key)
    return value


def _number(section, key, default, src, kind=float):
    value = section.get(key, default)
    if value is None:
        return None
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise src.error(key, "%s must be a %s, got %r" % (key, kind.__name__, value))


def _vector(value, key, src):
    try:
        arr = np.asarray(value, dtype=float).reshape(-1)
    except (TypeError, ValueError):
        raise src.error(key, "%s must be a list of numbers" % key)
    if not np.all(np.isfinite(arr)):
        raise src.error(key, "%s has non-finite entries" % key)
    return arr


def _build_plant(plant_sec, unc_sec, src):
    for key in ("q", "A", "B", "C"):
        if key not in plant_sec:
            raise src.error(None, "plant section is missing %r" % key)
    try:
        unc = None
        if unc_sec:
            missing = [k for k in ("M", "N1", "N2", "J") if k not in unc_sec]
            if missing:
                raise src.error("uncertainty", "uncertainty section is missing %s" % missing)
            unc = UncertaintyModel(unc_sec["M"], unc_sec["N1"], unc_sec["N2"], unc_sec["J"])
        plant = Plant(plant_sec["A"], plant_sec["B"], plant_sec["C"],
                      _number(plant_sec, "q", None, src), xi=_number(plant_sec, "xi", 0.0, src),
                      unc=unc)
    except ConfigError as e:
        if str(e).startswith(src.path):
            raise
        raise src.wrap(e)
    for key, actual in (("n", plant.n), ("m", plant.m), ("p", plant.p)):
        declared = plant_sec.get(key)
        if declared is not None and declared != actual:
            raise src.error(key, "%s = %r but the matrices give %d" % (key, declared, actual))
    phi_src = plant_sec.get("phi")
    if phi_src:
        try:
            plant = plant.replace(phi=parse(phi_src, plant.n, plant.m))
        except ConfigError as e:
            raise src.error("phi", "phi: %s" % e)
    return plant


def load_config(path):
    data, src = _read_json(path)
    if not isinstance(data, dict):
        raise ConfigError("%s: top level must be an object" % path)
    plant_sec = _section(data, "plant", src, required=True)
    unc_sec = _section(data, "uncertainty", src)
    synth = _section(data, "synth", src)
    sim = _section(data, "sim", src)
    rob = _section(data, "robustness", src)
    output = _section(data, "output", src)

    plant = _build_plant(plant_sec, unc_sec, src)
    x0 = _vector(plant_sec.get("x0", np.zeros(plant.n)), "x0", src)
    if x0.shape != (plant.n,):
        raise src.error("x0", "x0 has length %d, expected %d" % (x0.size, plant.n))

    cfg = RunConfig(name=str(data.get("name", "run")), plant=plant, x0=x0, path=path)
    cfg.scale = _number(unc_sec, "scale", cfg.scale, src)
    cfg.mode = synth.get("mode", cfg.mode)
    if cfg.mode not in MODES:
        raise src.error("mode", "mode must be one of %s, got %r" % (MODES, cfg.mode))
    cfg.n_c = _number(synth, "n_c", cfg.n_c, src, int)
    cfg.margin = _number(synth, "margin", cfg.margin, src)
    cfg.xi_convention = synth.get("xi_convention", cfg.xi_convention)
    if cfg.xi_convention not in XI_CONVENTIONS:
        raise src.error("xi_convention", "xi_convention must be one of %s" % (XI_CONVENTIONS,))
    cfg.T = _number(sim, "T", cfg.T, src)
    cfg.h = _number(sim, "h", cfg.h, src)
    if cfg.h <= 0.0 or cfg.T < cfg.h:
        raise src.error("h", "need h > 0 and T >= h")
    if sim.get("xc0") is not None:
        cfg.xc0 = _vector(sim["xc0"], "xc0", src)
    cfg.samples = _number(rob, "samples", cfg.samples, src, int)
    cfg.workers = _number(rob, "workers", cfg.workers, src, int)
    if rob.get("seed") is not None:
        try:
            cfg.seed = check_seed(rob["seed"])
        except (TypeError, ValueError) as e:
            raise src.error("seed", str(e))
    cfg.out_dir = str(output.get("dir", cfg.out_dir))
    if cfg.n_c < 0 or cfg.samples < 0 or cfg.workers < 1:
        raise src.error(None, "n_c and samples must be non-negative, workers positive")
    logger.debug("loaded %s: n=%d m=%d p=%d q=%g", path, plant.n, plant.m, plant.p, plant.q)
    return cfg


def load_controller(path, plant=None):
    data, src = _read_json(path)
    if not isinstance(data, dict):
        raise ConfigError("%s: controller file must be an object" % path)
    try:
        ctrl = Controller.from_dict(data)
        if plant is not None:
            ctrl.check_against(plant)
    except ConfigError as e:
        raise src.wrap(e)
    return ctrl


def save_controller(ctrl, path):
    with open(path, "w") as f:
        json.dump(ctrl.to_dict(), f, indent=2)
        f.write("\n")
    logger.info("controller written to %s", path)
