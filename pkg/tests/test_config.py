"""Run-config loading, schema validation and snapshotting."""

import json

import pytest

from sleepssl.config import (
    default_run_config,
    load_run_config,
    model_config_from_run,
    write_snapshot,
)
from sleepssl.errors import ConfigError


class TestDefaults:
    def test_top_level_keys(self):
        run = default_run_config()
        assert set(run) == {"seed", "deterministic", "data", "model",
                            "folds", "downstream", "tcm"}

    def test_downstream_defaults(self):
        run = default_run_config()
        assert run["downstream"]["scenario1"] == {
            "lr": 1e-5, "epochs": 300, "batch_size": 512, "class_weights": False,
        }
        assert run["downstream"]["scenario2"]["lr"] == 5e-3
        assert run["downstream"]["scenario2"]["epochs"] == 100
        assert run["downstream"]["scenario2"]["batch_size"] == 128

    def test_fold_defaults(self):
        run = default_run_config()
        assert run["folds"] == {"k": 5, "val_count": 15}

    def test_tcm_defaults(self):
        tcm = default_run_config()["tcm"]
        assert tcm["context_length"] == 20
        assert tcm["variant"] == "mamba"

    def test_json_serialisable(self):
        json.dumps(default_run_config())


class TestLoading:
    def test_partial_override(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"seed": 9, "model": {"mask_ratio": 0.6}}))
        run = load_run_config(path)
        assert run["seed"] == 9
        assert run["model"]["mask_ratio"] == 0.6
        # untouched defaults survive
        assert run["folds"]["k"] == 5

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"sed": 9}))
        with pytest.raises(ConfigError):
            load_run_config(path)

    def test_unknown_nested_key_rejected(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"model": {"mask_ration": 0.6}}))
        with pytest.raises(ConfigError):
            load_run_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_run_config(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError):
            load_run_config(path)

    def test_model_config_from_run(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps(
            {"seed": 4, "model": {"preset": "desk", "alpha": 0.5}}
        ))
        cfg = model_config_from_run(load_run_config(path))
        assert cfg.seed == 4
        assert cfg.alpha == 0.5
        assert cfg.encoder.dim == 64  # desk preset defaults filled in


class TestSnapshot:
    def test_written_and_readable(self, tmp_path):
        run = default_run_config()
        path = write_snapshot(run, tmp_path / "out")
        assert path.name == "resolved_config.json"
        assert json.loads(path.read_text())["folds"]["k"] == 5
