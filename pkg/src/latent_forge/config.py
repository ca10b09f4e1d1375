"""Command configuration: defaults, presets, strict merging, dot-path overrides.

Every command has a nested JSON-style default document. User documents and
``--set a.b=value`` overrides may only touch keys that exist in the defaults;
anything else is a :class:`ConfigError`.
"""

import copy
import json

import numpy as np

TWO_PI = 2.0 * np.pi


class ConfigError(ValueError):
    pass


SIM_DEFAULTS = {
    "size": 20,
    "a2": -1.0,
    "a4": 1.0,
    "k_grad": 0.5,
    "mobility": 1.0,
    "dt": 0.02,
    "init_amplitude": 0.01,
    "substeps": 1,
}

FAMILY_DEFAULTS = {
    "n_curves": 7500,
    "t_samples": 100,
    "amplitude_range": [0.5, 3.0],
    "growth_range": [-2.0, 2.0],
    "frequency_range": [TWO_PI, 4 * TWO_PI],
    "offset_range": [-0.5, 0.5],
}

DKL_DEFAULTS = {"hidden_sizes": None, "steps": 200, "lr": 0.01}

DEFAULTS = {
    "gen-cards": {"per_suit": 2000, "size": 32, "seed": 0},
    "gen-fields": {**FAMILY_DEFAULTS, "seed": 0},
    "simulate-sweep": {
        "fields": None,
        "family": dict(FAMILY_DEFAULTS),
        "sim": dict(SIM_DEFAULTS),
        "seed": 0,
        "batch_size": 256,
    },
    "train-dkl-static": {
        "dataset": None,
        "target": "ordinal_suit",
        "dkl": {**DKL_DEFAULTS, "steps": 500},
        "input_scaling": "auto",
        "seed": 0,
    },
    "train-vae": {
        "dataset": None,
        "vae": {"hidden_sizes": [256, 64], "epochs": 50, "lr": 1e-3, "batch_size": 64, "beta": 1.0},
        "input_scaling": "auto",
        "grid_n": 25,
        "seed": 0,
    },
    "run-bo": {
        "dataset": None,
        "target": "one_vs_rest:hearts",
        "n_init": 100,
        "n_steps": 500,
        "lambda": 10.0,
        "exponent": 0.5,
        "dkl": dict(DKL_DEFAULTS),
        "input_scaling": "auto",
        "oracle": "column",
        "sim": dict(SIM_DEFAULTS),
        "baseline": "none",
        "seed": 0,
    },
    "export-plots": {
        "source": None,
        "bins": 20,
        "hysteresis": {"enabled": True, "amplitude": 2.0, "periods": 1, "steps_per_period": 500,
                       "sim": dict(SIM_DEFAULTS)},
        "seed": 0,
    },
    "grad-check": {"seeds": 10, "tolerance": 1e-4, "seed": 0},
}

PRESETS = {
    "full-scale": {},
    "desk-cards": {
        "gen-cards": {"per_suit": 500, "size": 16},
        "run-bo": {"n_init": 30, "n_steps": 120, "target": "one_vs_rest:hearts"},
        "train-vae": {"vae": {"epochs": 30}},
    },
    "desk-ferrosim": {
        "gen-fields": {"n_curves": 1000},
        "simulate-sweep": {"family": {"n_curves": 1000}, "sim": {"size": 16}},
        "run-bo": {"n_init": 30, "n_steps": 60, "target": "curl", "sim": {"size": 16}},
        "train-dkl-static": {"target": "curl"},
        "export-plots": {"hysteresis": {"sim": {"size": 16}}},
    },
}


def merge_strict(base, override, path=""):
    """Recursively overlay ``override`` onto a copy of ``base``; unknown keys raise."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in out:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(out[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} expects an object")
            out[key] = merge_strict(out[key], value, where + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_set(config, assignment):
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = config
    for i, part in enumerate(parts[:-1]):
        if not isinstance(node.get(part), dict):
            raise ConfigError(f"unknown config key {'.'.join(parts[:i + 1])!r}")
        node = node[part]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key {key!r}")
    if isinstance(node[parts[-1]], dict):
        raise ConfigError(f"config key {key!r} is a section; set its fields individually")
    node[parts[-1]] = parse_value(raw)
    return config


def load_config_file(path, command):
    """Read a config document or a run manifest (whose resolved config is reused)."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    if "command" in doc and "config" in doc:
        if doc["command"] != command:
            raise ConfigError(f"manifest is for {doc['command']!r}, not {command!r}")
        return doc["config"], True
    return doc, False


def resolve(command, preset="full-scale", config_path=None, sets=()):
    if command not in DEFAULTS:
        raise ConfigError(f"unknown command {command!r}")
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    cfg = copy.deepcopy(DEFAULTS[command])
    from_manifest = False
    if config_path:
        doc, from_manifest = load_config_file(config_path, command)
        if from_manifest:
            cfg = merge_strict(cfg, doc)
    if not from_manifest:
        cfg = merge_strict(cfg, PRESETS[preset].get(command, {}))
        if config_path:
            cfg = merge_strict(cfg, doc)
    for s in sets:
        apply_set(cfg, s)
    return cfg
