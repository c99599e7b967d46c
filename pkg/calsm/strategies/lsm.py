from typing import Optional

from calsm.formats.cavi import FitOptions
from calsm.formats.covariates import Covariates
from calsm.formats.experiment import MethodResult
from calsm.formats.model import ModelConfig
from calsm.formats.network import Network
from calsm.formats.simulation import SimTruth
from calsm.services.cavi import lsm_mode
from calsm.strategies.method import MethodStrategy
from calsm.utilities.bundle import UtilitiesBundle


class LsmStrategy(MethodStrategy):
    """Covariate-free control: the CAVI engine run with the covariate block absent."""

    def __init__(
        self,
        utilities: UtilitiesBundle,
        model_config: ModelConfig,
        fit_options: FitOptions,
        seed: int,
    ) -> None:
        super().__init__(utilities=utilities, name="lsm", d=model_config.d)
        self.model_config = model_config
        self.fit_options = fit_options
        self.seed = seed

    def fit(self, net: Network, cov: Covariates, truth: Optional[SimTruth] = None) -> MethodResult:
        probabilities, latent, _, report = lsm_mode(
            net, self.model_config, self.fit_options, self.seed, logger=self.utilities.logger
        )
        return MethodResult(method=self.name, probabilities=probabilities, latent=latent, report=report)
