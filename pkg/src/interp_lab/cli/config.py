"""Experiment configuration files: schema, validation, and canonical hashing."""
from __future__ import annotations

import copy
import hashlib
import json
from importlib import resources
from pathlib import Path

import jsonschema

from ..errors import ConfigError

SCHEMA_VERSION = 1
KINDS = ("solve", "bohm", "jump", "bell", "branches", "decohere", "chain")
FIELD_KINDS = ("solve", "bohm", "jump")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_count = {"type": "integer", "minimum": 0}

_GRID = {
    "type": "object",
    "required": ["x_min", "x_max", "n_points"],
    "additionalProperties": False,
    "properties": {"x_min": _num, "x_max": _num, "n_points": {"type": "integer", "minimum": 8}},
}

_INITIAL = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["gaussian", "harmonic_ground", "stationary", "plane_wave", "two_lobe"]},
        "x0": _num, "sigma": _pos, "k0": _num, "k": _num, "omega": _pos,
        "displacement": _num, "center": _num, "level": _count, "separation": _pos,
        "weights": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
    },
    "additionalProperties": False,
}

_POTENTIAL = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["free", "harmonic", "gaussian_barrier", "double_slit", "beam_splitter"]},
        "omega": _pos, "center": _num, "height": {"type": ["number", "null"]}, "width": _pos,
        "slit_width": _pos, "separation": _pos, "edge": {"type": "number", "minimum": 0},
        "target": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    },
    "additionalProperties": False,
}

_SOLVER = {
    "type": "object",
    "required": ["method", "dt", "n_steps"],
    "properties": {
        "method": {"enum": ["split_step", "crank_nicolson"]},
        "dt": _pos, "n_steps": _count, "output_every": {"type": "integer", "minimum": 1},
        "strict": {"type": "boolean"},
    },
    "additionalProperties": False,
}

_OUTPUTS = {
    "type": "object",
    "properties": {
        "snapshots": {"type": "boolean"},
        "snapshot_stride": {"type": "integer", "minimum": 1},
        "trajectories": _count,
        "branch_split": {
            "type": "object",
            "properties": {"further_time": _pos, "recombine_omega": _pos},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "interp-lab experiment",
    "type": "object",
    "required": ["schema_version", "kind", "seed"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "kind": {"enum": list(KINDS)},
        "name": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "output_dir": {"type": "string"},
        "grid": _GRID,
        "initial_state": _INITIAL,
        "potential": _POTENTIAL,
        "solver": _SOLVER,
        "outputs": _OUTPUTS,
        "bohm": {
            "type": "object",
            "required": ["n"],
            "properties": {"n": _count, "substeps": {"type": "integer", "minimum": 1}},
            "additionalProperties": False,
        },
        "jump": {
            "type": "object",
            "properties": {
                "basis": {"enum": ["position", "momentum"]},
                "rate": _pos, "n_runs": _count, "n_samples": _count,
                "thresholds": {"type": "array", "items": _pos},
            },
            "additionalProperties": False,
        },
        "bell": {
            "type": "object",
            "required": ["n_trials"],
            "properties": {
                "angles": {"type": "array", "items": _num, "minItems": 4, "maxItems": 4},
                "n_trials": {"type": "integer", "minimum": 1},
                "state": {"type": "array", "minItems": 4, "maxItems": 4,
                          "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
                "rate": _pos, "duration": _pos,
            },
            "additionalProperties": False,
        },
        "branches": {
            "type": "object",
            "required": ["N", "p"],
            "properties": {
                "N": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "p": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "eps": _pos, "n_runs": _count,
            },
            "additionalProperties": False,
        },
        "decohere": {
            "type": "object",
            "required": ["c", "n_env"],
            "properties": {
                "c": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                "n_env": {"type": "array", "items": _count, "minItems": 1},
            },
            "additionalProperties": False,
        },
        "chain": {
            "type": "object",
            "required": ["amplitudes"],
            "properties": {
                "amplitudes": {"type": "array", "minItems": 2, "maxItems": 2,
                               "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
                "n_samples": _count,
                "record_dim": {"type": "integer", "minimum": 2, "maximum": 64},
                "grid": _GRID,
                "lobe_separation": _pos,
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"kind": {"enum": list(FIELD_KINDS)}}},
         "then": {"required": ["grid", "initial_state", "potential", "solver"]}},
        {"if": {"properties": {"kind": {"const": "bohm"}}}, "then": {"required": ["bohm"]}},
        {"if": {"properties": {"kind": {"const": "jump"}}}, "then": {"required": ["jump"]}},
        {"if": {"properties": {"kind": {"const": "bell"}}}, "then": {"required": ["bell"]}},
        {"if": {"properties": {"kind": {"const": "branches"}}}, "then": {"required": ["branches"]}},
        {"if": {"properties": {"kind": {"const": "decohere"}}}, "then": {"required": ["decohere"]}},
        {"if": {"properties": {"kind": {"const": "chain"}}}, "then": {"required": ["chain"]}},
    ],
}


def _error_path(err: jsonschema.ValidationError) -> str:
    path = err.json_path
    if err.validator == "required":
        missing = err.message.split("'")[1] if "'" in err.message else ""
        path = f"{path}.{missing}" if missing else path
    return path


def validate(config: dict) -> dict:
    """Raise :class:`ConfigError` naming the offending JSON path, else return ``config``."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(config), key=lambda e: (len(e.path), e.json_path))
    if errors:
        err = errors[0]
        raise ConfigError(err.message, _error_path(err))
    return config


def load(path: str | Path) -> dict:
    try:
        config = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", "$") from exc
    return validate(config)


def canonical(config: dict) -> bytes:
    return json.dumps(config, sort_keys=True, separators=(",", ":")).encode()


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical(config)).hexdigest()


def setup_hash(config: dict) -> str:
    """Hash of the physical setup only (grid, initial state, potential, solver)."""
    keys = ("grid", "initial_state", "potential", "solver")
    return config_hash({k: config.get(k) for k in keys})


def with_overrides(config: dict, seed: int | None = None, out: str | None = None) -> dict:
    config = copy.deepcopy(config)
    if seed is not None:
        config["seed"] = int(seed)
    if out is not None:
        config["output_dir"] = str(out)
    return validate(config)


def gallery() -> dict[str, Path]:
    """Bundled example configs by name."""
    root = resources.files("interp_lab") / "gallery"
    return {p.name[:-5]: Path(str(p)) for p in root.iterdir() if p.name.endswith(".json")}


def schema_json() -> str:
    return json.dumps(SCHEMA, indent=2)
