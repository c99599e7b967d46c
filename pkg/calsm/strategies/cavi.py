from typing import Optional

import numpy as np

from calsm.formats.cavi import FitOptions
from calsm.formats.covariates import Covariates
from calsm.formats.experiment import MethodResult
from calsm.formats.model import ModelConfig
from calsm.formats.network import Network
from calsm.formats.simulation import SimTruth
from calsm.services.cavi import (
    CaviService,
    covariate_importance,
    covariate_share,
    latent_means,
    node_mismatch_scores,
    predict_probabilities,
)
from calsm.strategies.method import MethodStrategy
from calsm.utilities.bundle import UtilitiesBundle


class CaviStrategy(MethodStrategy):
    """
    CALSM fitted by closed-form coordinate ascent.

    Besides probabilities and latent means, the result carries per-node mismatch scores,
    per-covariate importances and the share of the latent positions explained by Z.
    """

    def __init__(
        self,
        utilities: UtilitiesBundle,
        model_config: ModelConfig,
        fit_options: FitOptions,
        seed: int,
        name: str = "calsm",
    ) -> None:
        super().__init__(utilities=utilities, name=name, d=model_config.d)
        self.model_config = model_config
        self.fit_options = fit_options
        self.seed = seed
        self.cavi_service = CaviService(logger=self.utilities.logger)
        self.utilities.logger.info("CAVI strategy initiated")

    def fit(self, net: Network, cov: Covariates, truth: Optional[SimTruth] = None) -> MethodResult:
        state, report = self.cavi_service.fit_cavi(net, cov, self.model_config, self.fit_options, self.seed)
        return MethodResult(
            method=self.name,
            probabilities=predict_probabilities(state, self.model_config),
            latent=latent_means(state),
            report=report,
            extras={
                "node_mismatch_scores": node_mismatch_scores(state),
                "covariate_importance": covariate_importance(state),
                "covariate_share": np.array([covariate_share(state, cov)]),
            },
        )
