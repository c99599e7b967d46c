from typing import List, Optional

import numpy as np

from calsm.formats.covariates import Covariates
from calsm.formats.experiment import DataSource, Dataset, ResultBundle
from calsm.managers.local_storage import LocalStorageManager
from calsm.managers.network_io import NetworkIOManager
from calsm.managers.results import ResultsManager
from calsm.utilities.bundle import UtilitiesBundle
from calsm.utilities.errors import DimensionMismatchError


class StorageAssistant:
    """
    Middle layer between the director and the file managers: loading input data,
    staging and publishing results.
    """

    def __init__(self, utilities: UtilitiesBundle) -> None:
        self.utilities = utilities
        self.network_io_manager = NetworkIOManager(utilities=self.utilities)
        self.results_manager = ResultsManager(utilities=self.utilities)
        self.local_storage_manager = LocalStorageManager(utilities=self.utilities)

    def load_dataset(self, source: DataSource) -> Dataset:
        network = self.network_io_manager.load_network(source.network_path, source.network_format)
        if source.covariates_path is not None:
            covariates = self.network_io_manager.load_covariates(
                source.covariates_path, normalize=source.normalize_covariates, expected_n=network.n
            )
        else:
            covariates = Covariates.empty(network.n)
        labels: Optional[np.ndarray] = None
        if source.labels_path is not None:
            labels = np.loadtxt(source.labels_path, delimiter=",", dtype=np.int64, ndmin=1)
            if labels.shape[0] != network.n:
                self.utilities.logger.error(
                    f"Label file {source.labels_path} has {labels.shape[0]} entries for {network.n} nodes"
                )
                raise DimensionMismatchError("n", network.n, int(labels.shape[0]), source.labels_path)
        return Dataset(replicate=0, network=network, covariates=covariates, labels=labels)

    def emit_results(self, bundle: ResultBundle, directory: str) -> List[str]:
        return self.results_manager.emit_results(bundle, directory)

    def load_results(self, directory: str) -> ResultBundle:
        return self.results_manager.load_results(directory)

    def publish_results(self, staged: List[str], directory: str) -> List[str]:
        return self.results_manager.publish_results(staged, directory)

    def ensure_directory(self, directory: str) -> None:
        self.local_storage_manager.ensure_directory(directory)

    def create_staging_directory(self, directory: str) -> str:
        return self.local_storage_manager.create_staging_directory(directory)

    def remove_directory(self, path: str) -> bool:
        return self.local_storage_manager.remove_directory(path)
