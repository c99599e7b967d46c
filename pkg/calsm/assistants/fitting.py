from typing import Dict

from calsm.formats.experiment import Dataset, MethodResult
from calsm.strategies.method import MethodStrategy
from calsm.utilities.bundle import UtilitiesBundle


class FittingAssistant:
    """Runs every assembled method on one dataset."""

    def __init__(self, strategies: Dict[str, MethodStrategy], utilities: UtilitiesBundle) -> None:
        self.strategies = strategies
        self.utilities = utilities

    def fit_all(self, dataset: Dataset) -> Dict[str, MethodResult]:
        results: Dict[str, MethodResult] = {}
        for name, strategy in self.strategies.items():
            self.utilities.logger.info(f"Fitting {name} on replicate {dataset.replicate}")
            results[name] = strategy.fit(dataset.network, dataset.covariates, dataset.truth)
        return results
