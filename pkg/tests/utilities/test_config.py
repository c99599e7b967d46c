import json
import logging
from types import MappingProxyType
from unittest.mock import mock_open, patch

import pytest

from calsm.utilities.config import ConfigUtility
from calsm.utilities.errors import ConfigurationError


@pytest.fixture
def logger():
    return logging.getLogger("test_logger")


@pytest.fixture
def valid_config():
    return {"model": {"d": 2, "alpha": 1.0}, "engine": {"name": "cavi", "svi": {"batch_size": 1024}}, "seed": 3}


@pytest.fixture
def invalid_json():
    return '{"model": {"d": 2}'  # Missing closing bracket


def test_config_initialization_with_valid_dict(logger, valid_config):
    config_util = ConfigUtility(logger=logger, config=valid_config)
    assert isinstance(config_util.get_config(), MappingProxyType)
    assert config_util.get_config()["seed"] == 3


def test_config_initialization_invalid_dict(logger):
    with pytest.raises(TypeError):
        ConfigUtility(logger=logger, config="not_a_dict")  # type: ignore


def test_config_loading_valid_json(logger, valid_config):
    m = mock_open(read_data=json.dumps(valid_config))
    with patch("builtins.open", m):
        config_util = ConfigUtility(logger=logger, config_path="experiment.json")
        assert config_util.get_config()["model"]["d"] == 2


def test_config_loading_invalid_json(logger, invalid_json):
    m = mock_open(read_data=invalid_json)
    with patch("builtins.open", m):
        with pytest.raises(ValueError):
            ConfigUtility(logger=logger, config_path="invalid_config.json")


def test_config_loading_non_dict_json(logger):
    m = mock_open(read_data="[1, 2, 3]")
    with patch("builtins.open", m):
        with pytest.raises(TypeError):
            ConfigUtility(logger=logger, config_path="list_config.json")


def test_config_file_not_found(logger):
    with patch("builtins.open", side_effect=FileNotFoundError):
        with pytest.raises(FileNotFoundError):
            ConfigUtility(logger=logger, config_path="non_existent_config.json")


def test_reload_config(logger, valid_config):
    m = mock_open(read_data=json.dumps(valid_config))
    with patch("builtins.open", m):
        config_util = ConfigUtility(logger=logger, config_path="experiment.json")
        config_util.reload_config()
        assert config_util.get_config()["engine"]["name"] == "cavi"


def test_get_with_default_dotted_keys(logger, valid_config):
    config_util = ConfigUtility(logger=logger, config=valid_config)
    assert config_util.get_with_default("engine.svi.batch_size", 1) == 1024
    assert config_util.get_with_default("engine.svi.mc_samples", 10) == 10
    assert config_util.get_with_default("seed.nested", "fallback") == "fallback"
    assert config_util.get_with_default("missing") is None


def test_apply_overrides_parses_json_values(logger, valid_config):
    config_util = ConfigUtility(logger=logger, config=valid_config)
    config_util.apply_overrides(
        ["engine.svi.batch_size=256", "engine.name=svi", "metrics=[\"pcc\", \"ri\"]", "output_dir=results/run"]
    )
    config = config_util.get_config()
    assert isinstance(config, MappingProxyType)
    assert config["engine"]["svi"]["batch_size"] == 256
    assert config["engine"]["name"] == "svi"
    assert config["metrics"] == ["pcc", "ri"]
    assert config["output_dir"] == "results/run"
    # Untouched keys survive and the original dict is not mutated.
    assert config["model"]["d"] == 2
    assert valid_config["engine"]["svi"]["batch_size"] == 1024


def test_apply_overrides_creates_missing_sections(logger):
    config_util = ConfigUtility(logger=logger, config={})
    config_util.apply_overrides(["scenario.case=3", "scenario.n=50"])
    assert config_util.get_config()["scenario"] == {"case": 3, "n": 50}


def test_apply_overrides_rejects_malformed_entry(logger, valid_config):
    config_util = ConfigUtility(logger=logger, config=valid_config)
    with pytest.raises(ConfigurationError):
        config_util.apply_overrides(["engine.name"])
