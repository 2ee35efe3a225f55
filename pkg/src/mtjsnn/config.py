"""Run configuration: one YAML document, schema-checked, ns / uA at the boundary."""
import copy
import hashlib
import json
import os
from pathlib import Path

import jsonschema
import yaml

from .llgs import DeviceParams, table1_device

OUT_ENV = "MTJSNN_OUT"

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_device_fields = {
    k: _num for k in (
        "free_layer_width", "free_layer_length", "free_layer_thickness", "saturation_magnetization",
        "hm_thickness", "hm_width", "hm_resistivity", "gilbert_damping", "spin_hall_angle",
        "spin_flip_length", "temperature", "mgo_resistance_p", "mgo_resistance_ap")
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
        "output_dir": {"type": "string"},
        "devices": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name"],
                "properties": {
                    "name": {"type": "string"},
                    "preset": {"enum": [1, 2, 10, 20]},
                    "mode": {"enum": ["sync", "async"]},
                    "demag_factors": {"type": "array", "items": _nonneg, "minItems": 3, "maxItems": 3},
                    **_device_fields,
                },
            },
        },
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dt_ns": _pos,
                "pulse_width_ns": _pos,
                "warmup_ns": _nonneg,
                "settle_ns": _nonneg,
                "n_trials": {"type": "integer", "minimum": 100},
                "currents_ua": {"type": "array", "items": _num, "minItems": 5},
                "span": _pos,
                "n_points": {"type": "integer", "minimum": 5},
                "duration_ns": _pos,
                "bias_current_ua": _num,
                "tau0_ns": _pos,
                "t_read_ns": _nonneg,
                "async_duration_ns": _pos,
            },
        },
        "readout": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "read_current_ua": _nonneg,
                "read_time_ns": _pos,
                "tau_rc_ns": _pos,
                "offset_per_sigma": _nonneg,
                "sigma_level": {"enum": [-2, -1, 0, 1, 2]},
            },
        },
        "network": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "weights": {"type": "string"},
                "device": {"type": "string"},
                "mode": {"enum": ["sync", "async"]},
                "fidelity": {"enum": ["device", "behavioral"]},
                "time_ns": _num,
                "n_images": {"type": "integer", "minimum": 1},
                "target_accuracy": {"type": "number", "minimum": 0, "maximum": 1},
                "g_o_us": _pos,
                "batch": {"type": "integer", "minimum": 1},
            },
        },
        "dataset": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "images": {"type": "string"},
                "labels": {"type": "string"},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "values"],
            "properties": {
                "kind": {"type": "string"},
                "values": {"type": "array", "items": _num, "minItems": 1},
                "n_mc": {"type": "integer", "minimum": 1},
                "supply_model": {"enum": ["shared", "per_row"]},
            },
        },
        "fit": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"inputs": {"type": "array", "items": {"type": "string"}}},
        },
        "retention": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"deltas": {"type": "array", "items": _num, "minItems": 1}},
        },
        "library": {"type": "string"},
    },
}

DEFAULTS = {
    "seed": 0,
    "devices": [],
    "simulation": {
        "dt_ns": 0.001,
        "pulse_width_ns": 0.5,
        "warmup_ns": 5.0,
        "settle_ns": 0.0,
        "n_trials": 1000,
        "span": 2.0,
        "n_points": 13,
        "duration_ns": 10000.0,
        "bias_current_ua": 0.0,
        "tau0_ns": 0.01,
        "t_read_ns": 1.0,
        "async_duration_ns": 10000.0,
    },
    "readout": {
        "read_current_ua": 0.1,
        "read_time_ns": 1.0,
        "tau_rc_ns": 2.5,
        "sigma_level": 0,
    },
    "network": {
        "weights": "bundled:lenet6-12",
        "mode": "sync",
        "fidelity": "behavioral",
        "time_ns": 200.0,
        "n_images": 500,
        "target_accuracy": 0.96,
        "g_o_us": 5.0,
        "batch": 100,
    },
    "dataset": {"images": "bundled:test"},
    "retention": {"deltas": [1, 2, 3, 4, 4.6, 5, 6, 8, 10, 15, 20]},
    "library": "bundled",
}


class ConfigError(ValueError):
    """Invalid or unreadable run configuration."""


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate(doc):
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as e:
        loc = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config error at {loc}: {e.message}") from None


def load(path=None, overrides=None):
    """Validated config with defaults filled in; ``path=None`` gives the defaults."""
    doc = {}
    if path is not None:
        try:
            with open(path) as fh:
                doc = yaml.safe_load(fh) or {}
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from None
        except yaml.YAMLError as e:
            raise ConfigError(f"config is not valid YAML: {e}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a mapping")
    validate(doc)
    cfg = _merge(DEFAULTS, doc)
    if overrides:
        cfg = _merge(cfg, overrides)
    validate(cfg)
    return cfg


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def output_dir(cfg, flag=None):
    return Path(flag or cfg.get("output_dir") or os.environ.get(OUT_ENV) or "mtjsnn-out")


def device_from_entry(entry):
    fields = {k: v for k, v in entry.items() if k in _device_fields or k == "demag_factors"}
    if "demag_factors" in fields:
        fields["demag_factors"] = tuple(fields["demag_factors"])
    try:
        if "preset" in entry:
            return table1_device(entry["preset"], name=entry["name"], **fields)
        return DeviceParams(name=entry["name"], **fields)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"device {entry['name']!r}: {e}") from None


def default_mode(params):
    from .device import calibrate_barrier

    return "async" if calibrate_barrier(params) < 5 else "sync"
