from typing import Optional

from calsm.formats.covariates import Covariates
from calsm.formats.experiment import MethodResult
from calsm.formats.model import ModelConfig
from calsm.formats.network import Network
from calsm.formats.simulation import SimTruth
from calsm.formats.svi import SviConfig
from calsm.services.svi import SviService, predict_probabilities
from calsm.strategies.method import MethodStrategy
from calsm.utilities.bundle import UtilitiesBundle


class SviStrategy(MethodStrategy):
    """CALSM fitted by stochastic variational inference with edge subsampling."""

    def __init__(
        self,
        utilities: UtilitiesBundle,
        model_config: ModelConfig,
        svi_config: SviConfig,
        name: str = "calsm",
    ) -> None:
        super().__init__(utilities=utilities, name=name, d=model_config.d)
        self.model_config = model_config
        self.svi_config = svi_config
        self.svi_service = SviService(logger=self.utilities.logger)
        self.utilities.logger.info("SVI strategy initiated")

    def fit(self, net: Network, cov: Covariates, truth: Optional[SimTruth] = None) -> MethodResult:
        state, report = self.svi_service.fit_svi(net, cov, self.model_config, self.svi_config)
        return MethodResult(
            method=self.name,
            probabilities=predict_probabilities(state),
            latent=state.latent_means(),
            report=report,
            extras={"coefficient_means": state.coefficient_means()},
        )
