"""Tests for run configuration loading."""

import json

import pytest

from conftest import CONFIGS_DIR
from vgfit.config import config_from_dict, config_to_yaml, load_config
from vgfit.errors import ConfigError
from vgfit.models import FrftGrid, OutlierRule, RunConfig


class TestLoadConfig:
    """Tests for YAML and JSON config files."""

    def test_spy_config(self):
        """The shipped SPY config resolves to the default grid and a 13-point trim."""
        config = load_config(CONFIGS_DIR / "spy.yaml")
        assert config.grid == FrftGrid()
        assert config.scale == 100.0
        assert config.outlier_rule == OutlierRule(kind="abs_threshold", target_count=13)
        assert config.grad_tol == 1e-4

    def test_json_matches_yaml(self, tmp_path):
        """The same settings load identically from JSON and YAML."""
        settings = {"grid": {"a": 40.0, "n": 4096, "gamma": 0.01}, "scale": 1.0, "seed": 7}
        json_path = tmp_path / "run.json"
        json_path.write_text(json.dumps(settings))
        yaml_path = tmp_path / "run.yml"
        yaml_path.write_text("grid:\n  a: 40.0\n  n: 4096\n  gamma: 0.01\nscale: 1.0\nseed: 7\n")
        assert load_config(json_path) == load_config(yaml_path)

    def test_empty_file_gives_defaults(self, tmp_path):
        """An empty YAML file is the default config."""
        path = tmp_path / "empty.yaml"
        path.write_text("")
        assert load_config(path) == RunConfig()

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.yaml")

    def test_unsupported_extension(self, tmp_path):
        """Only .json, .yaml and .yml are accepted."""
        path = tmp_path / "run.toml"
        path.write_text("scale = 1\n")
        with pytest.raises(ConfigError, match="Unsupported file format"):
            load_config(path)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("{scale: }")
        with pytest.raises(ConfigError, match="Invalid JSON"):
            load_config(path)

    def test_yaml_rejects_python_objects(self, tmp_path):
        """Python object tags are refused by the safe loader."""
        path = tmp_path / "run.yaml"
        path.write_text("!!python/object/new:os.system\nargs: ['echo pwned']\n")
        with pytest.raises(ConfigError, match="Invalid YAML"):
            load_config(path)

    def test_validation_lists_locations(self, tmp_path):
        """Every failing field is reported with its dotted location."""
        path = tmp_path / "run.yaml"
        path.write_text("grid:\n  n: 1000\nscale: -1\nunknown: 3\n")
        with pytest.raises(ConfigError) as exc_info:
            load_config(path)
        message = str(exc_info.value)
        assert "Config validation failed" in message
        assert "grid.n" in message
        assert "scale" in message
        assert "unknown" in message

    def test_outlier_rule_needs_threshold_or_count(self):
        """A filtering rule without a threshold or target count is rejected."""
        with pytest.raises(ConfigError, match="outlier_rule"):
            config_from_dict({"outlier_rule": {"kind": "z_score"}})


class TestConfigToYaml:
    """Tests for writing configs back out."""

    @pytest.mark.parametrize(
        "config",
        [
            RunConfig(),
            RunConfig(grid=FrftGrid.from_support(a=512.0, n=16384, gamma=0.005), seed=3),
            RunConfig(outlier_rule=OutlierRule(kind="z_score", threshold=6.0, allow_large_removal=True)),
        ],
    )
    def test_round_trip(self, tmp_path, config):
        """load_config reads the dumped YAML back to an equal config."""
        path = tmp_path / "run.yaml"
        path.write_text(config_to_yaml(config))
        assert load_config(path) == config

    def test_omits_derived_grid_fields(self):
        """beta and delta_frft are recomputed on load, so they are not written."""
        text = config_to_yaml(RunConfig())
        assert "beta" not in text
        assert "delta_frft" not in text
        assert "gamma" not in text
