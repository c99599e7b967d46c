from typing import Optional

from calsm.formats.covariates import Covariates
from calsm.formats.experiment import MethodResult
from calsm.formats.network import Network
from calsm.formats.simulation import SimTruth
from calsm.services.svd import svd_y, svd_yz
from calsm.strategies.method import MethodStrategy
from calsm.utilities.bundle import UtilitiesBundle
from calsm.utilities.errors import ConfigurationError


class SvdYStrategy(MethodStrategy):
    """Rank-d truncated SVD of the adjacency matrix."""

    def __init__(self, utilities: UtilitiesBundle, d: int) -> None:
        super().__init__(utilities=utilities, name="svd_y", d=d)

    def fit(self, net: Network, cov: Covariates, truth: Optional[SimTruth] = None) -> MethodResult:
        approx, reconstruction = svd_y(net, self.d)
        return MethodResult(method=self.name, probabilities=reconstruction, latent=approx.embedding())


class SvdYZStrategy(MethodStrategy):
    """
    Rank-d truncated SVD of the network augmented with rescaled covariates.

    With `oracle` set the covariates are restricted to the true support of B*, which is
    only known for simulated data.
    """

    def __init__(self, utilities: UtilitiesBundle, d: int, oracle: bool = False) -> None:
        super().__init__(utilities=utilities, name="svd_yzo" if oracle else "svd_yz", d=d)
        self.oracle = oracle

    def fit(self, net: Network, cov: Covariates, truth: Optional[SimTruth] = None) -> MethodResult:
        support = None
        if self.oracle:
            if truth is None:
                self.utilities.logger.error("Oracle SVDyz requested without a simulated truth.")
                raise ConfigurationError("svd_yzo needs simulated data with a known coefficient support.")
            support = truth.support().tolist()
        approx, reconstruction = svd_yz(net, cov, self.d, oracle_support=support, logger=self.utilities.logger)
        return MethodResult(method=self.name, probabilities=reconstruction, latent=approx.embedding())
