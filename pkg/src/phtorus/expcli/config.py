"""Experiment configs: YAML documents validated against per-kind knob tables.

A config has the top-level keys ``experiment``, ``seed``, ``system`` (one
system table, or a list of them for ``audit``), ``params`` and optionally
``output``.  Unknown keys anywhere are rejected, and errors name the key.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from typing import Any, Callable

import yaml

EXPERIMENTS = ("spectrum", "audit", "holonomy", "perturb-sweep", "ip-test", "separation")
SYSTEM_KINDS = ("linear_anosov", "linear_automorphism", "standard_map", "product", "perturbed")
SEED_MAX = 2 ** 64 - 1


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


# ---------------------------------------------------------------------------
# knob validators


def _num(key, v, lo=None, hi=None, lo_open=False, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(key, f"expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(key, f"expected an integer, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(key, f"must be finite, got {v!r}")
    if lo is not None and (v <= lo if lo_open else v < lo):
        raise ConfigError(key, f"must be {'>' if lo_open else '>='} {lo}, got {v!r}")
    if hi is not None and v > hi:
        raise ConfigError(key, f"must be <= {hi}, got {v!r}")
    return int(v) if integer else float(v)


def integer(lo=None, hi=None):
    return lambda key, v: _num(key, v, lo, hi, integer=True)


def real(lo=None, hi=None, lo_open=False):
    return lambda key, v: _num(key, v, lo, hi, lo_open)


def positive():
    return real(0.0, lo_open=True)


def optional(check):
    return lambda key, v: None if v is None else check(key, v)


def choice(*options):
    def check(key, v):
        if v not in options:
            raise ConfigError(key, f"must be one of {list(options)}, got {v!r}")
        return v
    return check


def boolean():
    def check(key, v):
        if not isinstance(v, bool):
            raise ConfigError(key, f"expected true or false, got {v!r}")
        return v
    return check


def vector(length=None, item=None):
    item = item or real()

    def check(key, v):
        if not isinstance(v, (list, tuple)):
            raise ConfigError(key, f"expected a list, got {v!r}")
        if length is not None and len(v) != length:
            raise ConfigError(key, f"expected {length} entries, got {len(v)}")
        return [item(f"{key}[{i}]", x) for i, x in enumerate(v)]
    return check


def matrix(square=True):
    def check(key, v):
        if not isinstance(v, (list, tuple)) or not v:
            raise ConfigError(key, f"expected a non-empty list of rows, got {v!r}")
        return [vector(len(v) if square else None)(f"{key}[{i}]", r) for i, r in enumerate(v)]
    return check


def int_range():
    def check(key, v):
        vals = vector(2, integer(1, 200))(key, v)
        if vals[0] > vals[1]:
            raise ConfigError(key, f"range start exceeds end: {vals}")
        return vals
    return check


# ---------------------------------------------------------------------------
# schemas


Knob = tuple[Callable[[str, Any], Any], Any]

COMMON_SCHEDULE: dict[str, Knob] = {
    "c": (optional(real(0.0, 0.25, lo_open=True)), None),
    "sigma": (positive(), 4.0),
    "epsilon": (positive(), 0.5),
    "r": (integer(2, 11), 2),
    "C0": (positive(), 1.0),
    "lattice_window": (integer(1, 10), 2),
    "lattice_vector": (optional(vector(2, integer(-10, 10))), None),
}

PARAM_SCHEMAS: dict[str, dict[str, Knob]] = {
    "spectrum": {
        "n_iter": (integer(1000, 10 ** 9), 1_000_000),
        "qr_period": (integer(1, 20), 1),
        "burn_in": (integer(0, 10 ** 7), 1000),
        "x0": (optional(vector()), None),
        "expected": (optional(vector()), None),
        "tol": (positive(), 1e-3),
        "symmetry_tol": (positive(), 1e-3),
        "max_runtime": (positive(), 10.0),
    },
    "audit": {
        "orbit_points": (integer(0, 10 ** 7), 10_000),
        "uniform_points": (integer(0, 10 ** 7), 1_000),
        "alpha_grid": (integer(2, 1000), 50),
        "alpha_min": (positive(), 1e-4),
        "alpha_max": (positive(), 10.0),
        "isometric": (vector(item=integer(0, 100)), []),
    },
    "holonomy": {
        "tol": (real(1e-15, 1e-3), 1e-12),
        "n_pairs": (integer(1, 10_000), 20),
        "max_offset": (real(0.0, 0.25, lo_open=True), 0.2),
        "center_slice": (optional(vector(2)), None),
        "decay_margin": (real(0.0), 0.02),
        "groupoid_tol": (positive(), 1e-7),
        "identity_tol": (positive(), 1e-12),
        "max_runtime": (positive(), 60.0),
        "lattice_vector": (vector(2, integer(-10, 10)), [1, 0]),
        "homoclinic_z": (vector(2), [0.723607, 0.447214]),
        "homoclinic_tol": (positive(), 1e-6),
        "recurrence_stability": (positive(), 0.10),
    },
    "perturb-sweep": dict(COMMON_SCHEDULE, **{
        "k_range": (int_range(), [1, 20]),
        "outside_samples": (integer(1, 10 ** 7), 100_000),
        "det_samples": (integer(1, 10 ** 7), 10_000),
        "derivative_tol": (positive(), 1e-12),
        "det_tol": (positive(), 1e-10),
        "track_k": (vector(item=integer(1, 200)), [1, 2, 3, 4, 5, 6]),
        "cr_order": (integer(0, 4), 2),
        "max_runtime": (positive(), 60.0),
    }),
    "ip-test": {
        "block": (optional(matrix()), [[2, 1], [1, 1]]),
        "expected_angle": (optional(real()), 0.5535744),
        "n_angles": (integer(1, 10_000), 64),
        "max_steps": (integer(1, 10 ** 6), 200),
        "angle_tol": (positive(), 1e-6),
        "periodic_point": (optional(vector()), None),
        "period": (integer(1, 1000), 1),
        "expected_eigenvalues": (optional(vector(2)), [2.1668, 0.4615]),
        "eigenvalue_tol": (positive(), 1e-3),
        "n_orbits": (vector(item=integer(10_000, 10 ** 8)), [10_000, 100_000, 1_000_000]),
        "bins": (integer(2, 4096), 64),
        "grid": (integer(1, 256), 16),
        "n_pairs": (integer(1, 100_000), 100),
        "metric_triples": (integer(1, 10 ** 6), 1000),
        "metric_tol": (positive(), 1e-10),
    },
    "separation": dict(COMMON_SCHEDULE, **{
        "k_range": (int_range(), [3, 12]),
        "beta_schedule": (choice("default", "zero"), "default"),
        "period": (integer(1, 100), 1),
        "tol": (real(1e-15, 1e-3), 1e-12),
        "ratio_threshold": (positive(), 0.5),
        "allowed_violations": (integer(0, 100), 1),
        "max_runtime": (positive(), 600.0),
    }),
}

TOP_KEYS = {"experiment", "seed", "system", "params", "output"}

TWIST_KEYS: dict[str, Knob] = {
    "center": (vector(), None),
    "delta": (real(0.0, 0.25, lo_open=True), None),
    "beta": (real(-1.5707963267948966, 1.5707963267948966), 0.0),
    "r": (integer(2, 11), 2),
}


def _table(key: str, v) -> dict:
    if not isinstance(v, dict):
        raise ConfigError(key, f"expected a table, got {v!r}")
    return v


def _fill(prefix: str, given: dict, schema: dict[str, Knob], required=()) -> dict:
    for k in given:
        if k not in schema:
            raise ConfigError(f"{prefix}{k}", "unknown key")
    out = {}
    for k, (check, default) in schema.items():
        if k in given:
            out[k] = check(f"{prefix}{k}", given[k])
        elif k in required:
            raise ConfigError(f"{prefix}{k}", "required key missing")
        else:
            out[k] = copy.deepcopy(default)
    return out


def validate_system(spec, key: str = "system") -> dict:
    spec = _table(key, spec)
    kind = spec.get("kind")
    if kind not in SYSTEM_KINDS:
        raise ConfigError(f"{key}.kind", f"must be one of {list(SYSTEM_KINDS)}, got {kind!r}")
    rest = {k: v for k, v in spec.items() if k != "kind"}
    p = f"{key}."
    if kind in ("linear_anosov", "linear_automorphism"):
        out = _fill(p, rest, {"matrix": (matrix(), None)}, required=("matrix",))
    elif kind == "standard_map":
        out = _fill(p, rest, {"lambda": (real(), None)}, required=("lambda",))
    elif kind == "product":
        for k in rest:
            if k not in ("left", "right"):
                raise ConfigError(p + k, "unknown key")
        for k in ("left", "right"):
            if k not in rest:
                raise ConfigError(p + k, "required key missing")
        out = {"left": validate_system(rest["left"], p + "left"),
               "right": validate_system(rest["right"], p + "right")}
    else:
        for k in rest:
            if k not in ("base", "twist"):
                raise ConfigError(p + k, "unknown key")
        for k in ("base", "twist"):
            if k not in rest:
                raise ConfigError(p + k, "required key missing")
        out = {"base": validate_system(rest["base"], p + "base"),
               "twist": _fill(p + "twist.", _table(p + "twist", rest["twist"]), TWIST_KEYS,
                              required=("center", "delta"))}
    return dict(kind=kind, **out)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int
    system: Any           # validated system table, or a list of them for audit
    params: dict
    output: str | None = None

    def to_dict(self) -> dict:
        d = {"experiment": self.experiment, "seed": self.seed, "system": self.system,
             "params": self.params}
        if self.output is not None:
            d["output"] = self.output
        return d

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return ExperimentConfig(self.experiment, _num("seed", seed, 0, SEED_MAX, integer=True),
                                self.system, self.params, self.output)


def validate(doc) -> ExperimentConfig:
    doc = _table("config", doc)
    for k in doc:
        if k not in TOP_KEYS:
            raise ConfigError(k, "unknown key")
    kind = doc.get("experiment")
    if kind not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {list(EXPERIMENTS)}, got {kind!r}")
    seed = integer(0, SEED_MAX)("seed", doc.get("seed", 0))
    if "system" not in doc:
        raise ConfigError("system", "required key missing")
    sysdoc = doc["system"]
    if isinstance(sysdoc, list):
        if kind != "audit":
            raise ConfigError("system", "a list of systems is only accepted by the audit experiment")
        if not sysdoc:
            raise ConfigError("system", "empty system list")
        system = [validate_system(s, f"system[{i}]") for i, s in enumerate(sysdoc)]
    else:
        system = validate_system(sysdoc)
    params = _fill("params.", _table("params", doc.get("params", {}) or {}), PARAM_SCHEMAS[kind])
    if kind == "perturb-sweep":
        if params["cr_order"] > params["r"]:
            raise ConfigError("params.cr_order", f"must not exceed the bump smoothness r = {params['r']}")
    if kind == "audit" and params["alpha_min"] >= params["alpha_max"]:
        raise ConfigError("params.alpha_min", "must be below alpha_max")
    output = doc.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output", f"expected a path string, got {output!r}")
    return ExperimentConfig(kind, seed, system, params, output)


def load(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError("config", f"not valid YAML: {exc}") from None
    return validate(doc)


def parse(text: str) -> ExperimentConfig:
    return validate(yaml.safe_load(text))


def dump(cfg: ExperimentConfig | dict) -> str:
    doc = cfg.to_dict() if isinstance(cfg, ExperimentConfig) else cfg
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)
