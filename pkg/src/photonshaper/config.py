"""Experiment configuration: YAML loading and schema validation.

Every physical quantity carries its unit in the key name (_mhz, _us, _rad);
dimensionless numerics are restricted to an explicit allowlist.  Unknown or
unit-less numeric fields are rejected, not ignored.
"""

from __future__ import annotations

import json
from typing import Any

import jsonschema
import yaml

from .cqed import ConfigurationError

_NUMBER = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

_SHAPE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["family", "window_us"],
    "properties": {
        "family": {"enum": ["sech", "gaussian", "square"]},
        "t_char_us": _POS,
        "window_us": {
            "type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2,
        },
        "n_samples": {"type": "integer", "minimum": 16},
        "phase_jump": {
            "type": "object",
            "additionalProperties": False,
            "required": ["time_us", "dphi_rad"],
            "properties": {"time_us": _NUMBER, "dphi_rad": _NUMBER},
        },
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["cqed"],
    "properties": {
        "cqed": {
            "type": "object",
            "additionalProperties": False,
            "required": ["g_mhz", "kappa_c_mhz", "kappa_l_mhz", "gamma_mhz"],
            "properties": {
                "g_mhz": _POS,
                "kappa_c_mhz": _POS,
                "kappa_l_mhz": _POS,
                "gamma_mhz": _POS,
            },
        },
        "variant": {"enum": ["one_level", "two_level", "three_level"]},
        "detuning_mhz": _NUMBER,
        "reference_data": {"type": "string"},
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["start_mhz", "stop_mhz", "n_points"],
            "properties": {
                "start_mhz": _NUMBER,
                "stop_mhz": _NUMBER,
                "n_points": {"type": "integer", "minimum": 2},
                "variants": {
                    "type": "array",
                    "items": {"enum": ["one_level", "two_level", "three_level"]},
                },
                "lindblad_checks_mhz": {"type": "array", "items": _NUMBER},
            },
        },
        "shape": _SHAPE_SCHEMA,
        "shape_out": _SHAPE_SCHEMA,
        "pulse": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "compensate_phase": {"type": "boolean"},
                "omega_max_mhz": _POS,
                "tail_epsilon": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.5},
            },
        },
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "integrator": {"enum": ["rk4", "adaptive"]},
                "dt_us": _POS,
                "save_points": {"type": "integer", "minimum": 16},
                "mode": {"enum": ["full", "coherent", "both"]},
                "drain_margin_us": _POS,
                "use_numba": {"type": "boolean"},
            },
        },
        "select": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_phases": {"type": "integer", "minimum": 5},
                "eta0": {"type": "number", "minimum": 0, "maximum": 1},
            },
        },
        "homodyne": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "trials": {"type": "integer", "minimum": 100},
                "n_bins": {"type": "integer", "minimum": 2},
                "p1": {"type": "number", "minimum": 0, "maximum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "compensate_phase": {"type": "boolean"},
                "save_records": {"type": "boolean"},
            },
        },
        "convert": {
            "type": "object",
            "additionalProperties": False,
            "required": ["t_in_us", "t_out_us"],
            "properties": {
                "t_in_us": _POS,
                "t_out_us": _POS,
                "validate_lindblad": {"type": "boolean"},
                "validation_t_out_us": _POS,
            },
        },
        "budget": {
            "type": "object",
            "additionalProperties": False,
            "required": ["stages"],
            "properties": {
                "stages": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["name", "value"],
                        "properties": {
                            "name": {"type": "string"},
                            "value": {"type": "number", "minimum": 0, "maximum": 1},
                            "error": {"type": "number", "minimum": 0},
                        },
                    },
                },
            },
        },
    },
}

# dimensionless numeric keys that legitimately carry no unit suffix
_DIMENSIONLESS = {
    "n_points", "n_samples", "n_phases", "n_bins", "trials", "seed",
    "save_points", "eta0", "p1", "tail_epsilon", "value", "error",
    "max_steps",
}
_UNIT_SUFFIXES = ("_mhz", "_us", "_rad", "_mhz2us")


def _check_units(obj: Any, path: str = "") -> None:
    if isinstance(obj, dict):
        for key, val in obj.items():
            where = f"{path}.{key}" if path else key
            if isinstance(val, bool):
                continue
            if isinstance(val, (int, float)):
                if key in _DIMENSIONLESS or key.endswith(_UNIT_SUFFIXES):
                    continue
                raise ConfigurationError(
                    f"numeric field {where!r} carries no unit suffix and is "
                    "not a known dimensionless quantity"
                )
            _check_units(val, where)
    elif isinstance(obj, list):
        for i, val in enumerate(obj):
            _check_units(val, f"{path}[{i}]")


def validate_config(raw: dict) -> dict:
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigurationError(f"config schema violation: {exc.message}") from exc
    _check_units(raw)
    return raw


def load_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigurationError("config file must hold a mapping")
    return validate_config(raw)


def config_digest(raw: dict) -> str:
    import hashlib

    return hashlib.sha256(
        json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()
