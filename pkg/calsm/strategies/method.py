from abc import ABC, abstractmethod
from typing import Optional

from calsm.formats.covariates import Covariates
from calsm.formats.experiment import MethodResult
from calsm.formats.network import Network
from calsm.formats.simulation import SimTruth
from calsm.utilities.bundle import UtilitiesBundle


class MethodStrategy(ABC):
    """
    Abstract base class for methods that turn a network (and covariates) into an n x n
    link-probability estimate and n latent vectors.

    Attributes:
        utilities: An instance of UtilitiesBundle containing logger and config utilities.
        name: Key under which the method's scores are reported.
        d: Latent dimension / SVD rank.
    """

    def __init__(self, utilities: UtilitiesBundle, name: str, d: int) -> None:
        self.utilities = utilities
        self.name = name
        self.d = d

    @abstractmethod
    def fit(self, net: Network, cov: Covariates, truth: Optional[SimTruth] = None) -> MethodResult:
        """
        Fit the method to one dataset.

        Args:
            net: The observed network.
            cov: Node covariates (may have zero columns).
            truth: Generating truth for simulated data; only oracle methods read it.

        Returns:
            MethodResult: Probabilities, latent vectors and an optional fit report.
        """
        pass
