"""Tests for configuration module."""

import json
import math
import tempfile
from pathlib import Path

import pytest

from nscrit.config import Config
from nscrit.utils import ConfigError, GridError


def test_config_defaults():
    """Test default configuration values."""
    config = Config()
    assert config.grid.dim == 3
    assert config.grid.box_length == pytest.approx(2 * math.pi)
    assert config.solver.space == "ykt"
    assert config.solver.c0 is None
    assert config.solver.c0_safety == 2.0
    assert config.solver.nodes_per_panel == 2
    assert config.data.initial == "shear"


def test_config_from_dict():
    """Test creating config from dictionary."""
    data = {
        "grid": {"dim": 2, "n_space": 32},
        "solver": {"space": "yktq", "q": 10.0},
    }
    config = Config.from_dict(data)
    assert config.grid.dim == 2
    assert config.grid.n_space == 32
    assert config.solver.q == 10.0
    assert config.solver.tol == 1e-10  # Default


def test_config_to_dict():
    """Test converting config to dictionary."""
    data = Config().to_dict()
    assert set(data) == {"grid", "data", "solver", "estimate", "output"}
    assert Config.from_dict(data).to_dict() == data


def test_config_from_yaml_file():
    """Test loading config from YAML file."""
    with tempfile.TemporaryDirectory() as tmpdir:
        config_path = Path(tmpdir) / "config.yaml"
        config_path.write_text(
            """
grid:
  dim: 2
  n_space: 8
  n_time: 6
data:
  initial: taylor_green
  amplitude: 0.001
solver:
  space: y2
  max_iter: 20
output:
  write_fields: false
"""
        )

        config = Config.from_file(config_path)
        assert config.grid.n_time == 6
        assert config.data.initial == "taylor_green"
        assert config.data.amplitude == 0.001
        assert config.solver.max_iter == 20
        assert config.output.write_fields is False


def test_config_from_json_file(tmp_path):
    config_path = tmp_path / "cfg.json"
    config_path.write_text(json.dumps({"grid": {"dim": 2}, "solver": {"space": "morrey", "p": 4}}))
    config = Config.from_file(config_path)
    assert config.solver.space == "morrey"
    assert config.solver.p == 4


def test_config_file_not_found():
    """Test error handling for missing config file."""
    with pytest.raises(FileNotFoundError):
        Config.from_file(Path("nonexistent.yaml"))


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="Unknown keys"):
        Config.from_dict({"solver": {"spaces": "ykt"}})
    with pytest.raises(ConfigError, match="Unknown config sections"):
        Config.from_dict({"plots": {}})


def test_config_rejects_invalid_values():
    with pytest.raises(ConfigError, match="solver space"):
        Config.from_dict({"solver": {"space": "besov"}})
    with pytest.raises(ConfigError, match="initial_path"):
        Config.from_dict({"data": {"initial": "file"}})
    with pytest.raises(ConfigError, match="c0"):
        Config.from_dict({"solver": {"c0": -1.0}})
    with pytest.raises(ConfigError, match="nodes_per_panel"):
        Config.from_dict({"solver": {"nodes_per_panel": 1}})


def test_config_non_mapping_file(tmp_path):
    config_path = tmp_path / "list.yaml"
    config_path.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError, match="mapping"):
        Config.from_file(config_path)


def test_make_grid():
    config = Config.from_dict({"grid": {"dim": 2, "n_space": 8, "n_time": 4, "spacing": "uniform"}})
    grid = config.make_grid()
    assert grid.space_shape == (8, 8)
    assert grid.n_time == 4

    with pytest.raises(GridError, match="power of two"):
        Config.from_dict({"grid": {"n_space": 12}}).make_grid()
