import logging

import pytest

from calsm.utilities.bundle import UtilitiesBundle


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run the slow simulation studies")
    parser.addoption(
        "--replicates",
        action="store",
        type=int,
        default=None,
        help="replicates per simulation study (default: the study's own count, 25 or 50)",
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: directional replications that take minutes")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def mock_utilities_bundle(mocker):
    """UtilitiesBundle with a mocked logger and an empty in-memory config."""
    utilities = mocker.MagicMock(spec=UtilitiesBundle)
    utilities.logger = mocker.MagicMock(spec=logging.Logger)
    utilities.config = {}
    utilities.config_utility = mocker.MagicMock()
    utilities.config_utility.get_with_default.side_effect = lambda key, default=None: default
    return utilities


@pytest.fixture
def real_utilities():
    """UtilitiesBundle with a real logger, for tests that run the numeric stack end to end."""
    return UtilitiesBundle(config_path="", logger=logging.getLogger("calsm_test"), config={})


@pytest.fixture
def replicate_count(request):
    """Replicates for a slow study: `--replicates N` when given, otherwise the study's own count."""
    override = request.config.getoption("--replicates")

    def count(default):
        return override if override is not None else default

    return count
