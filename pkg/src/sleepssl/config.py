"""Run configuration: a JSON file mirroring the model hyperparameters plus
dataset paths and scenario parameters.

Unknown keys are rejected; missing keys fall back to the published defaults.
The fully resolved snapshot is written into every output bundle.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

from .errors import ConfigError
from .model import ModelConfig, preset_config


def default_run_config(preset: str = "B") -> dict:
    model = preset_config(preset)
    return {
        "seed": 0,
        "deterministic": False,
        "data": {"cache_dir": None, "channel": "EEG Fpz-Cz"},
        "model": model.to_dict(),
        "folds": {"k": 5, "val_count": 15},
        "downstream": {
            "scenario1": {"lr": 1e-5, "epochs": 300, "batch_size": 512,
                          "class_weights": False},
            "scenario2": {"lr": 5e-3, "epochs": 100, "batch_size": 128,
                          "class_weights": False},
        },
        "tcm": {
            "d_state": 16, "d_conv": 4, "expand": 2,
            "num_blocks": 2, "context_length": 20, "variant": "mamba",
        },
    }


def _merge(defaults: dict, user: dict, path: str = "") -> dict:
    merged = copy.deepcopy(defaults)
    for key, value in user.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(defaults[key], dict) and isinstance(value, dict):
            merged[key] = _merge(defaults[key], value, path + key + ".")
        else:
            merged[key] = value
    return merged


def load_run_config(path: str | Path) -> dict:
    """Load a JSON run config, validating keys against the default schema."""
    try:
        user = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(user, dict):
        raise ConfigError("config root must be a JSON object")
    preset = user.get("model", {}).get("preset", "B")
    return _merge(default_run_config(preset), user)


def model_config_from_run(run: dict) -> ModelConfig:
    model = copy.deepcopy(run["model"])
    model["seed"] = run["seed"]
    return ModelConfig.from_dict(model)


def write_snapshot(run: dict, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "resolved_config.json"
    path.write_text(json.dumps(run, indent=2))
    return path
