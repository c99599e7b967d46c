from unittest.mock import patch

import numpy as np
import pytest

from calsm.formats.cavi import FitOptions, FitReport
from calsm.formats.covariates import Covariates
from calsm.formats.model import ModelConfig
from calsm.formats.simulation import SimScenario
from calsm.formats.svi import SviConfig
from calsm.services.cavi import CaviService, init_state
from calsm.services.simulation import generate
from calsm.services.svd import svd_yz
from calsm.strategies.cavi import CaviStrategy
from calsm.strategies.lsm import LsmStrategy
from calsm.strategies.method import MethodStrategy
from calsm.strategies.svd import SvdYStrategy, SvdYZStrategy
from calsm.strategies.svi import SviStrategy
from calsm.utilities.errors import ConfigurationError


@pytest.fixture
def truth():
    return generate(SimScenario(case=1, n=30, p=6, s_b=2, seed=4))


def test_method_strategy_is_abstract(mock_utilities_bundle):
    with pytest.raises(TypeError):
        MethodStrategy(utilities=mock_utilities_bundle, name="x", d=2)  # type: ignore[abstract]


def test_cavi_strategy_wraps_service(mock_utilities_bundle, truth):
    cfg = ModelConfig(d=2)
    state = init_state(truth.network, truth.z, cfg.resolve(30), seed=0)
    report = FitReport(engine="cavi", iterations=1, final_elbo=-10.0, converged=False)
    strategy = CaviStrategy(utilities=mock_utilities_bundle, model_config=cfg, fit_options=FitOptions(), seed=7)
    mock_utilities_bundle.logger.info.assert_called_with("CAVI strategy initiated")

    with patch.object(CaviService, "fit_cavi", return_value=(state, report)) as mock_fit:
        result = strategy.fit(truth.network, truth.z)

    mock_fit.assert_called_once_with(truth.network, truth.z, cfg, strategy.fit_options, 7)
    assert result.method == "calsm"
    assert result.report is report
    assert result.probabilities.shape == (30, 30)
    np.testing.assert_array_equal(result.latent, state.x.mean)
    assert set(result.extras) == {"node_mismatch_scores", "covariate_importance", "covariate_share"}
    assert 0.0 <= result.extras["covariate_share"][0]


def test_cavi_strategy_end_to_end(mock_utilities_bundle, truth):
    strategy = CaviStrategy(
        utilities=mock_utilities_bundle, model_config=ModelConfig(d=2), fit_options=FitOptions(max_cycles=5), seed=0
    )
    result = strategy.fit(truth.network, truth.z)
    assert result.report is not None
    assert result.report.iterations <= 5
    assert result.extras["covariate_importance"].shape == (6,)


def test_lsm_strategy_ignores_covariates(mock_utilities_bundle, truth):
    strategy = LsmStrategy(
        utilities=mock_utilities_bundle, model_config=ModelConfig(d=2), fit_options=FitOptions(max_cycles=5), seed=0
    )
    with_covariates = strategy.fit(truth.network, truth.z)
    without = strategy.fit(truth.network, Covariates.empty(30))
    assert with_covariates.method == "lsm"
    np.testing.assert_array_equal(with_covariates.probabilities, without.probabilities)


def test_svi_strategy_reports_coefficients(mock_utilities_bundle, truth):
    strategy = SviStrategy(
        utilities=mock_utilities_bundle,
        model_config=ModelConfig(d=2),
        svi_config=SviConfig(batch_size=64, max_epochs=2, mc_samples=1),
    )
    result = strategy.fit(truth.network, truth.z)
    assert result.method == "calsm"
    assert result.report is not None and result.report.engine == "svi"
    assert result.extras["coefficient_means"].shape == (6, 2)


def test_svd_strategies(mock_utilities_bundle, truth):
    y_result = SvdYStrategy(utilities=mock_utilities_bundle, d=2).fit(truth.network, truth.z)
    yz_result = SvdYZStrategy(utilities=mock_utilities_bundle, d=2).fit(truth.network, truth.z)
    assert y_result.method == "svd_y"
    assert yz_result.method == "svd_yz"
    assert y_result.report is None
    assert y_result.latent.shape == yz_result.latent.shape == (30, 2)
    assert yz_result.probabilities.shape == (30, 30)


def test_oracle_svd_uses_true_support(mock_utilities_bundle, truth):
    strategy = SvdYZStrategy(utilities=mock_utilities_bundle, d=2, oracle=True)
    assert strategy.name == "svd_yzo"
    with patch("calsm.strategies.svd.svd_yz", wraps=svd_yz) as spy:
        strategy.fit(truth.network, truth.z, truth=truth)
    assert spy.call_args.kwargs["oracle_support"] == truth.support().tolist()


def test_oracle_svd_without_truth_is_rejected(mock_utilities_bundle, truth):
    strategy = SvdYZStrategy(utilities=mock_utilities_bundle, d=2, oracle=True)
    with pytest.raises(ConfigurationError):
        strategy.fit(truth.network, truth.z)
    mock_utilities_bundle.logger.error.assert_called_once()
