"""
Scenario files: TOML in, a normalized dict out.

Every section has a fixed key set; unknown keys and type mismatches raise
ValidationError naming the offending ``section.key``. ``normalize`` fills
defaults, so the dict it returns (echoed into every report) re-runs to the
same result.
"""

from __future__ import annotations

import copy
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .generators import EXAMPLES, Family, GeneratorSpec, Mode, make_example
from .measures import DiscreteMeasure
from .propagators import BackendConfig, BackendKind

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SOLVERS = ("solve_local", "solve_global_pathindep", "solve_adapted", "solve_anticipating", "solve_mfg")

SOLVER_MODES = {
    "solve_local": (Mode.PATH_INDEPENDENT,),
    "solve_global_pathindep": (Mode.PATH_INDEPENDENT,),
    "solve_adapted": (Mode.ADAPTED,),
    "solve_anticipating": (Mode.ANTICIPATING, Mode.FULL_PATH),
}

SOLVER_CERTIFICATES = {
    "solve_local": ("CONTRACTION", "WEAK_RESIDUAL", "TIME_LIPSCHITZ"),
    "solve_global_pathindep": ("CONTRACTION", "RESTART", "SENSITIVITY", "WEAK_RESIDUAL", "TIME_LIPSCHITZ"),
    "solve_adapted": ("FACTORIAL", "GRONWALL", "WEAK_RESIDUAL", "TIME_LIPSCHITZ"),
    "solve_anticipating": ("WEAK_RESIDUAL", "MOMENT"),
    "solve_mfg": ("WEAK_RESIDUAL", "CONSISTENCY"),
}
# computed by the runner on top of any solver
EXTRA_CERTIFICATES = ("HOLDER", "MOMENT")

_NUM = (int, float)

# section -> key -> (accepted types, default); a default of REQUIRED must be supplied
REQUIRED = object()

SCHEMA = {
    "scenario": {
        "name": (str, REQUIRED),
        "description": (str, ""),
    },
    "generator": {
        "example": (str, REQUIRED),
        "family": (str, None),
        "mode": (str, None),
        "params": (dict, {}),
    },
    "game": {
        "base01": (_NUM, 1.0),
        "base10": (_NUM, 1.0),
        "u_max": (_NUM, 2.0),
        "running": (list, [0.0, 0.0]),
        "terminal": (list, [0.0, 0.0]),
        "crowd": (_NUM, 0.0),
        "running_crowd": (_NUM, 0.0),
    },
    "initial": {
        "atoms": (list, None),
        "weights": (list, None),
        "sampler": (str, None),
        "mean": (_NUM, 0.0),
        "variance": (_NUM, 1.0),
        "size": (int, 10_000),
        "seed": (int, 0),
    },
    "backend": {
        "kind": (str, REQUIRED),
        "h_in": (_NUM, REQUIRED),
        "states": (list, None),
        "n_particles": (int, 10_000),
        "seed": (int, 0),
        "guard": (_NUM, 0.1),
        "probe_particles": (int, 2000),
    },
    "solver": {
        "name": (str, REQUIRED),
        "T": (_NUM, REQUIRED),
        "h": (_NUM, REQUIRED),
        "tol": (_NUM, 1e-8),
        "beta": (_NUM, None),
        "max_iter": (int, None),
        "safety": (_NUM, 0.5),
        "perturbations": (int, 1),
        "probe_trials": (int, 8),
        "probe_seed": (int, 0),
        "residual_bound": (_NUM, 1e-4),
    },
    "diagnostics": {
        "certificates": (list, None),
        "dictionary_class": (str, None),
        "dictionary_size": (int, 16),
        "dictionary_seed": (int, 0),
        "moment_p": (_NUM, 2.0),
    },
    "output": {
        "report": (str, "report.json"),
        "path_csv": (str, "path.csv"),
        "certificates_csv": (str, "certificates.csv"),
        "csv_max_atoms": (int, 256),
    },
}

_OPTIONAL_SECTIONS = {"generator", "game", "diagnostics", "output", "initial"}
_SAMPLERS = ("normal",)


def _fail(where: str, msg: str):
    raise ValidationError(f"{where}: {msg}")


def load(path: str | Path) -> dict:
    """Read a TOML scenario, or the ``config`` member of a JSON report, and normalize it."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read ({exc.strerror})") from None
    if path.suffix == ".json":
        try:
            data = json.loads(raw)["config"]
        except (ValueError, KeyError, TypeError):
            raise ValidationError(f"{path}: not a report with an echoed config") from None
    else:
        try:
            data = tomllib.loads(raw.decode("utf-8"))
        except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
            raise ValidationError(f"{path}: malformed TOML ({exc})") from None
    return normalize(data)


def _check_type(where: str, value, types):
    if types is _NUM:
        if isinstance(value, bool) or not isinstance(value, _NUM):
            _fail(where, f"expected a number, got {type(value).__name__}")
        if not math.isfinite(value):
            _fail(where, "must be finite")
        return float(value)
    if types is int and (isinstance(value, bool) or not isinstance(value, int)):
        _fail(where, f"expected an integer, got {type(value).__name__}")
    if types is not int and not isinstance(value, types):
        _fail(where, f"expected {types.__name__}, got {type(value).__name__}")
    return copy.deepcopy(value)


def normalize(data: dict) -> dict:
    """Validate keys and types, fill defaults and cross-check the sections."""
    if not isinstance(data, dict):
        raise ValidationError("config: top level must be a table")
    unknown = sorted(set(data) - set(SCHEMA))
    if unknown:
        _fail("config", f"unknown section(s) {unknown}; allowed {sorted(SCHEMA)}")
    out = {}
    for section, keys in SCHEMA.items():
        if section not in data:
            if section in _OPTIONAL_SECTIONS:
                continue
            _fail(section, "section is required")
        block = data[section]
        if not isinstance(block, dict):
            _fail(section, "must be a table")
        extra = sorted(set(block) - set(keys))
        if extra:
            _fail(f"{section}.{extra[0]}", f"unknown key; allowed {sorted(keys)}")
        norm = {}
        for key, (types, default) in keys.items():
            where = f"{section}.{key}"
            if key in block and not (block[key] is None and default is None):
                norm[key] = _check_type(where, block[key], types)
            elif default is REQUIRED:
                _fail(where, "is required")
            else:
                norm[key] = copy.deepcopy(default)
        out[section] = norm
    out.setdefault("diagnostics", {k: copy.deepcopy(v[1]) for k, v in SCHEMA["diagnostics"].items()})
    out.setdefault("output", {k: copy.deepcopy(v[1]) for k, v in SCHEMA["output"].items()})
    _cross_check(out)
    return out


def _cross_check(cfg: dict):
    solver = cfg["solver"]
    name = solver["name"]
    if name not in SOLVERS:
        _fail("solver.name", f"unknown solver {name!r}; choose from {list(SOLVERS)}")
    for key in ("T", "h", "tol"):
        if not solver[key] > 0:
            _fail(f"solver.{key}", "must be positive")
    if solver["beta"] is not None and not 0 < solver["beta"] <= 1:
        _fail("solver.beta", "must lie in (0, 1]")
    kind = cfg["backend"]["kind"]
    if kind not in BackendKind.__members__:
        _fail("backend.kind", f"unknown backend {kind!r}; choose from {list(BackendKind.__members__)}")

    if name == "solve_mfg":
        if "generator" in cfg:
            _fail("generator", "solve_mfg builds its own controlled generator; use a [game] section instead")
        if "game" not in cfg:
            _fail("game", "solve_mfg needs a [game] section")
        for key in ("running", "terminal"):
            v = cfg["game"][key]
            if len(v) != 2 or not all(isinstance(x, _NUM) and not isinstance(x, bool) for x in v):
                _fail(f"game.{key}", "must be a pair of numbers")
        if kind != "FINITE_STATE":
            _fail("backend.kind", "solve_mfg runs on FINITE_STATE")
    else:
        if "game" in cfg:
            _fail("game", f"a [game] section only applies to solve_mfg, not {name}")
        if "generator" not in cfg:
            _fail("generator", "section is required")
        gen = build_generator(cfg)
        allowed = SOLVER_MODES[name]
        if gen.mode not in allowed:
            _fail("solver.name", f"{name} requires generator.mode in {[m.value for m in allowed]}, "
                                 f"but {cfg['generator']['example']} is {gen.mode.value}")
        if kind == "FINITE_STATE" and not gen.is_jump_family:
            _fail("backend.kind", f"FINITE_STATE needs a jump family, got {gen.family.value}")

    certs = cfg["diagnostics"]["certificates"]
    if certs is not None:
        allowed = set(SOLVER_CERTIFICATES[name])
        if name != "solve_mfg":
            allowed |= set(EXTRA_CERTIFICATES)
        bad = sorted(set(map(str, certs)) - allowed)
        if bad:
            _fail("diagnostics.certificates", f"{bad} not available for {name}; choose from {sorted(allowed)}")
    if cfg["diagnostics"]["dictionary_class"] is not None:
        from .testfunctions import FunctionClass

        try:
            FunctionClass(cfg["diagnostics"]["dictionary_class"])
        except ValueError:
            _fail("diagnostics.dictionary_class", f"choose from {[c.value for c in FunctionClass]}")
    if not 0 < cfg["diagnostics"]["moment_p"] <= 2:
        _fail("diagnostics.moment_p", "must lie in (0, 2]")
    if cfg["output"]["csv_max_atoms"] < 1:
        _fail("output.csv_max_atoms", "must be >= 1")
    build_backend(cfg)
    build_initial(cfg)


def build_generator(cfg: dict) -> GeneratorSpec:
    g = cfg["generator"]
    if g["example"] not in EXAMPLES:
        _fail("generator.example", f"unknown example {g['example']!r}; choose from {sorted(EXAMPLES)}")
    try:
        gen = make_example(g["example"], **g["params"])
    except ValidationError as exc:
        _fail("generator.params", str(exc))
    if g["family"] is not None:
        if g["family"] not in Family.__members__:
            _fail("generator.family", f"unknown family {g['family']!r}")
        if Family(g["family"]) != gen.family:
            _fail("generator.family", f"{g['example']} is {gen.family.value}, not {g['family']}")
    if g["mode"] is not None:
        if g["mode"] not in Mode.__members__:
            _fail("generator.mode", f"unknown mode {g['mode']!r}")
        if Mode(g["mode"]) != gen.mode:
            _fail("generator.mode", f"{g['example']} is {gen.mode.value}, not {g['mode']}")
    return gen


def build_backend(cfg: dict, seed: int | None = None) -> BackendConfig:
    b = cfg["backend"]
    states = b["states"]
    if states is None and b["kind"] == "FINITE_STATE":
        if cfg["solver"]["name"] == "solve_mfg":
            states = [[0.0], [1.0]]
        else:
            gs = build_generator(cfg).states
            states = None if gs is None else gs.tolist()
    if b["kind"] == "FINITE_STATE" and states is None:
        _fail("backend.states", "FINITE_STATE needs a state list")
    try:
        backend = BackendConfig(
            b["kind"], b["h_in"], states=states, n_particles=b["n_particles"],
            seed=b["seed"] if seed is None else seed, guard=b["guard"], probe_particles=b["probe_particles"],
        )
        backend.steps_per(cfg["solver"]["h"])
    except ValidationError as exc:
        _fail("backend", str(exc))
    return backend


def build_initial(cfg: dict) -> DiscreteMeasure:
    init = cfg.get("initial")
    if init is None:
        if cfg["solver"]["name"] == "solve_mfg" or cfg["backend"]["kind"] == "FINITE_STATE":
            return DiscreteMeasure([[0.0]], [1.0])
        _fail("initial", "section is required for the PARTICLE backend")
    if init["sampler"] is not None:
        if init["atoms"] is not None or init["weights"] is not None:
            _fail("initial.sampler", "give either a sampler or atoms/weights, not both")
        if init["sampler"] not in _SAMPLERS:
            _fail("initial.sampler", f"choose from {list(_SAMPLERS)}")
        if not init["variance"] >= 0:
            _fail("initial.variance", "must be >= 0")
        if init["size"] < 1:
            _fail("initial.size", "must be >= 1")
        rng = np.random.default_rng(init["seed"])
        return DiscreteMeasure.from_samples(rng.normal(init["mean"], math.sqrt(init["variance"]), init["size"]))
    if init["atoms"] is None:
        _fail("initial.atoms", "give atoms (and weights) or a sampler")
    atoms = init["atoms"]
    weights = init["weights"] if init["weights"] is not None else [1.0 / len(atoms)] * len(atoms)
    try:
        return DiscreteMeasure(atoms, weights)
    except (ValidationError, ValueError) as exc:
        _fail("initial", str(exc))


__all__ = [
    "SCHEMA",
    "SOLVERS",
    "SOLVER_MODES",
    "SOLVER_CERTIFICATES",
    "EXTRA_CERTIFICATES",
    "load",
    "normalize",
    "build_generator",
    "build_backend",
    "build_initial",
]
