"""Experiment configuration: schema, loading, dotted-path overrides and object construction."""
import copy
import os

import numpy as np
import yaml

from . import fields as fl
from .exceptions import ConfigError
from .flow import SCHEMES, FlowConfig
from .lattice import TorusGrid

__all__ = ["DEFAULTS", "load_config", "validate", "apply_overrides", "build_grid_spec", "build_initial",
           "flow_config", "make_rng"]

# section -> key -> (type check, default)
SCHEMA = {
    "grid": {
        "nx": (int, 32), "ny": (int, 32), "lx": (float, 1.0), "ly": (float, 1.0),
    },
    "group": {
        "k": (int, None), "weights": (list, [[1]]), "tau": ((list, float), [4 * np.pi]),
        "degrees": ((list, int), [1]),
    },
    "init": {
        "kind": (str, "random"), "seed": (int, None), "amplitude": (float, 0.3),
        "modes": (int, 1), "value": ((list, float), None), "scale": (float, 1.0), "path": (str, None),
    },
    "flow": {
        "scheme": (str, "semi-implicit"), "dt0": (float, 1e-2), "dt_min": (float, 1e-9),
        "tmax": (float, 50.0), "tol": (float, 1e-8), "snapshot_every": (float, 0.0),
        "record_every": (int, 1),
    },
    "analysis": {
        "rays": (list, []), "loj_fit": (bool, False), "uniqueness_gauge_seed": (int, None),
        "uniqueness_amplitude": (float, 0.3), "weight_tmax": (float, 64.0), "phi_tol": (float, 1e-4),
        "sigma_tol": (float, 1e-6),
    },
    "output": {
        "dir": (str, "out"), "snapshot_format": (str, "binary"),
    },
}

INIT_KINDS = ("random", "constant", "vortex-ansatz", "file")
DEFAULTS = {sec: {k: v[1] for k, v in keys.items()} for sec, keys in SCHEMA.items()}


def _type_ok(value, kind):
    if value is None:
        return True
    kinds = kind if isinstance(kind, tuple) else (kind,)
    for k in kinds:
        if k is float and isinstance(value, (int, float)) and not isinstance(value, bool):
            return True
        if k is int and isinstance(value, int) and not isinstance(value, bool):
            return True
        if k not in (int, float) and isinstance(value, k):
            return True
    return False


def validate(raw) -> dict:
    """Merge ``raw`` over the defaults and check it against the schema.

    Raises
    ------
    ConfigError
        For unknown sections or keys, wrong types and inconsistent values.
    """
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping of sections")
    cfg = copy.deepcopy(DEFAULTS)
    for sec, body in raw.items():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section {sec!r}; allowed: {sorted(SCHEMA)}")
        if body is None:
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"section {sec!r} must be a mapping")
        for key, val in body.items():
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {sec}.{key}; allowed: {sorted(SCHEMA[sec])}")
            kind = SCHEMA[sec][key][0]
            if not _type_ok(val, kind):
                raise ConfigError(f"{sec}.{key} has type {type(val).__name__}, expected {kind}")
            cfg[sec][key] = val
    _check_values(cfg)
    return cfg


def _check_values(cfg):
    g = cfg["grid"]
    if g["nx"] < 4 or g["ny"] < 4:
        raise ConfigError("grid.nx and grid.ny must be at least 4")
    if g["lx"] <= 0 or g["ly"] <= 0:
        raise ConfigError("grid.lx and grid.ly must be positive")
    grp = cfg["group"]
    w = np.atleast_2d(np.asarray(grp["weights"], dtype=float))
    if not np.allclose(w, np.round(w)):
        raise ConfigError("group.weights must be integers")
    k = w.shape[0]
    if grp["k"] is not None and grp["k"] != k:
        raise ConfigError(f"group.k = {grp['k']} but weights have {k} rows")
    for key in ("tau", "degrees"):
        arr = np.atleast_1d(np.asarray(grp[key], dtype=float))
        if arr.size not in (1, k):
            raise ConfigError(f"group.{key} needs {k} entries, got {arr.size}")
    init = cfg["init"]
    if init["kind"] not in INIT_KINDS:
        raise ConfigError(f"init.kind must be one of {INIT_KINDS}, got {init['kind']!r}")
    if init["kind"] == "random" and init["seed"] is None:
        raise ConfigError("init.seed is mandatory for random initial data")
    if init["kind"] == "file" and not init["path"]:
        raise ConfigError("init.path is required for file initial data")
    fcfg = cfg["flow"]
    if fcfg["scheme"] not in SCHEMES:
        raise ConfigError(f"flow.scheme must be one of {SCHEMES}")
    for key in ("dt0", "dt_min", "tol"):
        if fcfg[key] <= 0:
            raise ConfigError(f"flow.{key} must be positive")
    if fcfg["tmax"] < 0:
        raise ConfigError("flow.tmax must be nonnegative")
    if fcfg["record_every"] < 1:
        raise ConfigError("flow.record_every must be at least 1")
    if cfg["output"]["snapshot_format"] not in ("binary", "csv"):
        raise ConfigError("output.snapshot_format must be 'binary' or 'csv'")
    for ray in cfg["analysis"]["rays"]:
        if not isinstance(ray, dict) or set(ray) - {"constant", "modes", "seed", "amplitude"}:
            raise ConfigError("analysis.rays entries are mappings with keys constant | modes, seed, amplitude")


def load_config(path) -> dict:
    """Read a YAML (or JSON) file and validate it."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: cannot parse configuration: {exc}") from exc
    return validate(raw)


def apply_overrides(raw: dict, tokens) -> dict:
    """Apply ``--section.key value`` tokens to a raw config mapping."""
    raw = copy.deepcopy(raw) if raw else {}
    it = iter(tokens)
    for tok in it:
        if not tok.startswith("--") or "." not in tok:
            raise ConfigError(f"unrecognised argument {tok!r}")
        name = tok[2:]
        if "=" in name:
            name, text = name.split("=", 1)
        else:
            try:
                text = next(it)
            except StopIteration:
                raise ConfigError(f"missing value for {tok}") from None
        sec, _, key = name.partition(".")
        try:
            val = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse value for {tok}: {exc}") from exc
        raw.setdefault(sec, {})
        if raw[sec] is None:
            raw[sec] = {}
        if not isinstance(raw[sec], dict):
            raise ConfigError(f"section {sec!r} must be a mapping")
        raw[sec][key] = val
    return raw


def make_rng(seed):
    """Counter-based generator so results do not depend on platform defaults."""
    return np.random.Generator(np.random.Philox(int(seed)))


def build_grid_spec(cfg):
    g = cfg["grid"]
    grp = cfg["group"]
    grid = TorusGrid(g["nx"], g["ny"], g["lx"], g["ly"])
    w = np.atleast_2d(np.asarray(grp["weights"], dtype=float))
    k = w.shape[0]
    tau = np.broadcast_to(np.atleast_1d(np.asarray(grp["tau"], dtype=float)), (k,))
    deg = np.broadcast_to(np.atleast_1d(np.asarray(grp["degrees"], dtype=float)), (k,))
    try:
        spec = fl.ActionSpec(w, tau, deg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return grid, spec


def build_initial(cfg):
    """Initial ``(Connection, Section)`` described by the ``init`` section."""
    from .io import read_snapshot, snapshot_to_pair

    grid, spec = build_grid_spec(cfg)
    init = cfg["init"]
    kind = init["kind"]
    if kind == "random":
        return fl.holomorphic_pair(grid, spec, make_rng(init["seed"]), amplitude=init["amplitude"],
                                   modes=init["modes"], scale=init["scale"])
    if kind == "vortex-ansatz":
        rng = make_rng(init["seed"] if init["seed"] is not None else 0)
        u = fl.theta_section(grid, spec, rng=rng)
        return fl.Connection(grid, spec), u.with_values(init["scale"] * u.u)
    if kind == "constant":
        val = np.zeros(spec.n) if init["value"] is None else np.atleast_1d(np.asarray(init["value"], float))
        if val.size not in (1, spec.n):
            raise ConfigError(f"init.value needs {spec.n} entries")
        val = np.broadcast_to(val, (spec.n,))
        u = np.broadcast_to(val[:, None, None], (spec.n,) + grid.shape).astype(complex)
        return fl.Connection(grid, spec), fl.Section(grid, spec, u)
    if not os.path.exists(init["path"]):
        raise OSError(f"initial data file {init['path']!r} not found")
    return snapshot_to_pair(read_snapshot(init["path"]))


def flow_config(cfg, keep_gauge=False) -> FlowConfig:
    f = cfg["flow"]
    return FlowConfig(scheme=f["scheme"], dt0=f["dt0"], dt_min=f["dt_min"], t_max=f["tmax"], tol=f["tol"],
                      snapshot_every=f["snapshot_every"], record_every=f["record_every"],
                      keep_gauge=keep_gauge, raise_on_tmax=False)
