"""Run configuration: a YAML tree with validated blocks.

Every block has defaults, so an empty file is a valid config describing
the mollified step (1, 2, 0.5) with mu = 0.1, g = 1.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math

import yaml

AUTO = "auto"

DEFAULTS = {
    "profile": {"kind": "mollified_step", "rho_light": 1.0, "rho_heavy": 2.0,
                "mollify_width": 0.5},
    "physics": {"mu": 0.1, "g": 1.0},
    "grid": {"L": AUTO, "N": 1024, "h": None},
    "sweep": {"k_min": 0.01, "k_max": 100.0, "n_k": 64, "spacing": "log", "tol": 1e-10},
    "mode": {"k": 1.0, "xi": None},
    "synthesis": {"R1": AUTO, "R2": AUTO, "quadrature": "lattice", "n_r": 24, "n_theta": 32,
                  "nx": 64, "ny": 64, "period": AUTO, "z_stride": 8,
                  "times": [0.0, 0.5, 1.0, 2.0], "orders": [0, 1, 2], "amplitude": 1.0},
    "oracle": {"xi": [1.0, 0.0], "dt": AUTO, "T": AUTO, "N": None, "richardson": True},
    "output": {"directory": "out", "formats": ["csv", "json"], "snapshot_format": "binary"},
    "seed": 0,
}

_PROFILE_KEYS = {
    "mollified_step": {"kind", "rho_light", "rho_heavy", "mollify_width"},
    "tabulated": {"kind", "table"},
    "constant": {"kind", "rho0"},
}


class ConfigError(ValueError):
    """Validation failure; ``field`` is the dotted path of the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


def _merge(base, over, path=""):
    out = copy.deepcopy(base)
    for key, val in over.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(where, "unknown key")
        if isinstance(base[key], dict) and key != "profile":
            if not isinstance(val, dict):
                raise ConfigError(where, "must be a mapping")
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


def _number(cfg, path, positive=True, allow_auto=False, allow_none=False, integer=False):
    block, key = path.split(".") if "." in path else (None, path)
    val = cfg[block][key] if block else cfg[key]
    if allow_auto and val == AUTO:
        return
    if allow_none and val is None:
        return
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(path, f"must be a number, got {val!r}")
    if integer and int(val) != val:
        raise ConfigError(path, "must be an integer")
    if not math.isfinite(val):
        raise ConfigError(path, "must be finite")
    if positive and not val > 0:
        raise ConfigError(path, f"must be positive, got {val!r}")


def validate(cfg):
    """Raise ConfigError on the first invalid field."""
    prof = cfg["profile"]
    if not isinstance(prof, dict):
        raise ConfigError("profile", "must be a mapping")
    kind = prof.get("kind")
    if kind not in _PROFILE_KEYS:
        raise ConfigError("profile.kind", "must be mollified_step, tabulated or constant")
    extra = set(prof) - _PROFILE_KEYS[kind]
    if extra:
        raise ConfigError(f"profile.{sorted(extra)[0]}", f"not a parameter of kind {kind}")
    if kind == "mollified_step":
        for key in ("rho_light", "rho_heavy", "mollify_width"):
            if key not in prof:
                raise ConfigError(f"profile.{key}", "missing")
            _number(cfg, f"profile.{key}")
        if not prof["rho_heavy"] > prof["rho_light"]:
            raise ConfigError("profile.rho_heavy", "must exceed rho_light")
        if not prof["mollify_width"] < 1:
            raise ConfigError("profile.mollify_width", "must be below 1")
    elif kind == "tabulated":
        table = prof.get("table")
        if not isinstance(table, list) or len(table) < 4:
            raise ConfigError("profile.table", "needs at least 4 [x3, rho] rows")
        for i, row in enumerate(table):
            if (not isinstance(row, list) or len(row) != 2
                    or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in row)):
                raise ConfigError(f"profile.table[{i}]", "must be a pair of numbers")
            if not row[1] > 0:
                raise ConfigError(f"profile.table[{i}]", "density must be positive")
        xs = [r[0] for r in table]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ConfigError("profile.table", "x3 column must be strictly increasing")
    else:
        prof.setdefault("rho0", 1.0)
        _number(cfg, "profile.rho0")

    _number(cfg, "physics.mu")
    _number(cfg, "physics.g")

    _number(cfg, "grid.L", allow_auto=True)
    _number(cfg, "grid.N", integer=True, allow_none=cfg["grid"]["h"] is not None)
    _number(cfg, "grid.h", allow_none=True)
    if cfg["grid"]["N"] is not None and cfg["grid"]["N"] < 64:
        raise ConfigError("grid.N", "must be at least 64")

    sw = cfg["sweep"]
    for key in ("k_min", "k_max", "tol"):
        _number(cfg, f"sweep.{key}")
    _number(cfg, "sweep.n_k", integer=True)
    if not sw["k_max"] > sw["k_min"]:
        raise ConfigError("sweep.k_max", "must exceed k_min")
    if sw["spacing"] not in ("log", "linear"):
        raise ConfigError("sweep.spacing", "must be 'log' or 'linear'")

    md = cfg["mode"]
    _number(cfg, "mode.k", allow_none=md["xi"] is not None)
    if md["xi"] is not None:
        _pair(md["xi"], "mode.xi")

    sy = cfg["synthesis"]
    _number(cfg, "synthesis.R1", allow_auto=True)
    _number(cfg, "synthesis.R2", allow_auto=True)
    if (sy["R1"] == AUTO) != (sy["R2"] == AUTO):
        raise ConfigError("synthesis.R2", "R1 and R2 must both be numbers or both 'auto'")
    if sy["R1"] != AUTO and not sy["R2"] > sy["R1"]:
        raise ConfigError("synthesis.R2", "must exceed R1")
    if sy["quadrature"] not in ("polar", "lattice"):
        raise ConfigError("synthesis.quadrature", "must be 'polar' or 'lattice'")
    for key in ("n_r", "n_theta", "nx", "ny", "z_stride"):
        _number(cfg, f"synthesis.{key}", integer=True)
    if sy["n_theta"] % 2:
        raise ConfigError("synthesis.n_theta", "must be even")
    _number(cfg, "synthesis.period", allow_auto=True)
    _number(cfg, "synthesis.amplitude", positive=False)
    if sy["amplitude"] < 0:
        raise ConfigError("synthesis.amplitude", "must be nonnegative")
    if not isinstance(sy["times"], list) or not sy["times"]:
        raise ConfigError("synthesis.times", "must be a non-empty list")
    for i, t in enumerate(sy["times"]):
        if isinstance(t, bool) or not isinstance(t, (int, float)) or not t >= 0:
            raise ConfigError(f"synthesis.times[{i}]", "must be a nonnegative number")
    if not isinstance(sy["orders"], list) or not sy["orders"]:
        raise ConfigError("synthesis.orders", "must be a non-empty list")
    for i, o in enumerate(sy["orders"]):
        if isinstance(o, bool) or not isinstance(o, int) or not 0 <= o <= 4:
            raise ConfigError(f"synthesis.orders[{i}]", "must be an integer in [0, 4]")

    orc = cfg["oracle"]
    _pair(orc["xi"], "oracle.xi")
    _number(cfg, "oracle.dt", allow_auto=True)
    _number(cfg, "oracle.T", allow_auto=True)
    _number(cfg, "oracle.N", integer=True, allow_none=True)
    if orc["N"] is not None and orc["N"] < 64:
        raise ConfigError("oracle.N", "must be at least 64")
    if not isinstance(orc["richardson"], bool):
        raise ConfigError("oracle.richardson", "must be true or false")

    out = cfg["output"]
    if not isinstance(out["directory"], str) or not out["directory"]:
        raise ConfigError("output.directory", "must be a non-empty string")
    if not isinstance(out["formats"], list) or not set(out["formats"]) <= {"csv", "json"}:
        raise ConfigError("output.formats", "must be a list drawn from csv, json")
    if out["snapshot_format"] not in ("binary", "csv-slices"):
        raise ConfigError("output.snapshot_format", "must be 'binary' or 'csv-slices'")

    seed = cfg["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", "must be a nonnegative integer")


def _pair(val, path):
    if (not isinstance(val, list) or len(val) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in val)):
        raise ConfigError(path, "must be a pair of numbers")
    if val[0] == 0 and val[1] == 0:
        raise ConfigError(path, "must be nonzero")


class RunConfig:
    """Validated configuration tree. ``data`` is a plain nested dict."""

    def __init__(self, data=None):
        data = {} if data is None else data
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a mapping")
        merged = _merge(DEFAULTS, data)
        if "profile" in data:
            merged["profile"] = copy.deepcopy(data["profile"])
        validate(merged)
        self.data = merged

    def __getitem__(self, key):
        return self.data[key]

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.data == other.data

    @classmethod
    def from_yaml(cls, text):
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError("<root>", f"not valid YAML: {exc}") from exc
        return cls(data)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_yaml(fh.read())

    def to_yaml(self):
        return yaml.safe_dump(self.data, sort_keys=True, default_flow_style=None)

    def canonical(self):
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def override(self, **blocks):
        """New config with some blocks partially replaced."""
        data = copy.deepcopy(self.data)
        for block, vals in blocks.items():
            if isinstance(data.get(block), dict) and block != "profile":
                data[block].update(vals)
            else:
                data[block] = vals
        return RunConfig(data)
