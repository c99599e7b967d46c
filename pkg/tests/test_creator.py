from unittest.mock import MagicMock, patch

import pytest

from calsm.creator import CAVI_COMMUNITY_CYCLES, ExperimentCreator, echo_config, parse_experiment
from calsm.formats.experiment import ResultBundle
from calsm.strategies.cavi import CaviStrategy
from calsm.strategies.lsm import LsmStrategy
from calsm.strategies.svd import SvdYStrategy, SvdYZStrategy
from calsm.strategies.svi import SviStrategy
from calsm.utilities.errors import ConfigurationError


@pytest.fixture
def mock_config():
    return {
        "seed": 11,
        "replicates": 2,
        "output_dir": "out",
        "model": {"d": 2},
        "engine": {"name": "cavi", "cavi": {"max_cycles": 50}, "svi": {"batch_size": 128}},
        "scenario": {"case": 2, "n": 40, "p": 10},
        "metrics": ["pcc", "pcc_diff"],
        "baselines": ["lsm", "svd_y", "svd_yz", "svd_yzo"],
    }


@pytest.fixture
def creator_factory(mock_utilities_bundle):
    def build(config):
        mock_utilities_bundle.config = config
        return ExperimentCreator(utilities=mock_utilities_bundle)

    return build


def test_parse_experiment(mock_config):
    experiment = parse_experiment(mock_config, MagicMock())
    assert experiment.model.d == 2
    assert experiment.fit_options.max_cycles == 50
    assert experiment.svi.batch_size == 128
    assert experiment.svi.seed == 11
    assert experiment.scenario.resolved_mismatch_count() == 5
    assert experiment.methods == ["calsm", "lsm", "svd_y", "svd_yz", "svd_yzo"]
    assert experiment.echo["seed"] == 11
    assert experiment.echo["scenario"]["n"] == 40


def test_parse_experiment_defaults():
    experiment = parse_experiment({"scenario": {}}, MagicMock())
    assert experiment.engine == "cavi"
    assert experiment.metrics == ["pcc"]
    assert experiment.replicates == 1
    assert experiment.output_dir == "results"


def test_community_scenario_raises_cycle_cap(mock_config):
    mock_config["scenario"] = {"community": True, "n": 30, "p": 10}
    mock_config["engine"] = {"name": "cavi"}
    experiment = parse_experiment(mock_config, MagicMock())
    assert experiment.scenario.community_variant
    assert experiment.fit_options.max_cycles == CAVI_COMMUNITY_CYCLES


@pytest.mark.parametrize(
    "section, values",
    [("model", {"dims": 2}), ("scenario", {"nodes": 10}), ("data", {"network_path": "x", "fmt": "csv"})],
)
def test_unknown_keys_are_rejected(section, values):
    logger = MagicMock()
    with pytest.raises(ConfigurationError, match="Unknown keys"):
        parse_experiment({section: values}, logger)
    logger.error.assert_called_once()


def test_invalid_values_become_configuration_errors():
    with pytest.raises(ConfigurationError):
        parse_experiment({"model": {"d": 0}, "scenario": {}}, MagicMock())
    with pytest.raises(ConfigurationError):
        parse_experiment({"model": "flat", "scenario": {}}, MagicMock())


def test_echo_config_is_plain_json(mock_config):
    experiment = parse_experiment(mock_config, MagicMock())
    echo = echo_config(experiment)
    assert echo["scenario"]["value_set"] == [-2.0, 2.0, -1.5, 1.5]
    assert echo["svi"]["gamma_init"] == [10.0, 10.0, 0.1, 1.0]


def test_assemble_cavi_strategies(creator_factory, mock_config):
    creator = creator_factory(mock_config)
    strategies = creator.strategies
    assert isinstance(strategies["calsm"], CaviStrategy)
    assert isinstance(strategies["lsm"], LsmStrategy)
    assert isinstance(strategies["svd_y"], SvdYStrategy)
    assert isinstance(strategies["svd_yz"], SvdYZStrategy) and not strategies["svd_yz"].oracle
    assert strategies["svd_yzo"].oracle


def test_assemble_svi_strategy(creator_factory, mock_config):
    mock_config["engine"]["name"] = "svi"
    assert isinstance(creator_factory(mock_config).strategies["calsm"], SviStrategy)


def test_baseline_as_primary(creator_factory, mock_config):
    mock_config["primary"] = "svd_y"
    mock_config["baselines"] = ["svd_y"]
    mock_config["metrics"] = []
    creator = creator_factory(mock_config)
    assert list(creator.strategies) == ["svd_y"]


@pytest.mark.parametrize(
    "changes, message",
    [
        ({"engine": {"name": "gibbs"}}, "engine must be one of"),
        ({"metrics": ["auc"]}, "unknown metrics"),
        ({"baselines": ["pca"]}, "unknown baselines"),
        ({"replicates": 0}, "replicates must be at least 1"),
        ({"clustering": {"k": 0}}, "clustering.k must be at least 1"),
        ({"metrics": ["ri"]}, "RI needs reference labels"),
        ({"metrics": ["pcc_diff"], "baselines": []}, "Diff metrics need at least two methods"),
        ({"data": {"network_path": "net.tsv"}}, "exactly one of 'scenario' or 'data'"),
        ({"primary": "mystery"}, "primary must be"),
    ],
)
def test_validation_rejects_before_compute(creator_factory, mock_config, mock_utilities_bundle, changes, message):
    mock_config.update(changes)
    with patch("calsm.creator.Director") as mock_director:
        with pytest.raises(ConfigurationError, match=message):
            creator_factory(mock_config)
    mock_director.assert_not_called()
    mock_utilities_bundle.logger.error.assert_called()


def test_loaded_data_cannot_use_pcc_or_oracle(creator_factory, mock_config, tmp_path):
    network = tmp_path / "net.tsv"
    network.write_text("0\t1\n")
    del mock_config["scenario"]
    mock_config["data"] = {"network_path": str(network), "labels_path": str(tmp_path / "missing.csv")}
    with pytest.raises(ConfigurationError) as excinfo:
        creator_factory(mock_config)
    message = str(excinfo.value)
    assert "PCC needs true link probabilities" in message
    assert "svd_yzo needs" in message
    assert "input file does not exist" in message


def test_run_experiment_hands_strategies_to_director(creator_factory, mock_config, mock_utilities_bundle):
    creator = creator_factory(mock_config)
    bundle = MagicMock(spec=ResultBundle)
    with patch("calsm.creator.Director") as mock_director:
        mock_director.return_value.run_experiment.return_value = bundle
        assert creator.run_experiment() is bundle

    mock_director.assert_called_once_with(
        utilities=mock_utilities_bundle, strategies=creator.strategies, experiment=creator.experiment, workers=1
    )
    mock_utilities_bundle.logger.info.assert_any_call("Experiment finished successfully.")
