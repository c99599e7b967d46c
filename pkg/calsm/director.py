import platform
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Tuple, TypeVar

import numpy as np
import scipy
import torch

from calsm.assistants.evaluation import EvaluationAssistant
from calsm.assistants.fitting import FittingAssistant
from calsm.assistants.simulation import SimulationAssistant
from calsm.assistants.storage import StorageAssistant
from calsm.formats.clustering import Partition
from calsm.formats.experiment import Dataset, ExperimentConfig, MethodResult, MetricRow, ResultBundle
from calsm.strategies.method import MethodStrategy
from calsm.utilities.bundle import UtilitiesBundle
from calsm.utilities.errors import StageError

T = TypeVar("T")


class Director:
    """
    The Director runs one experiment end to end: acquire data (simulate or load), fit
    every method on every replicate, score them, and write the result bundle. Each stage
    failure is re-raised as a StageError naming the stage. Results are written into a
    staging directory and only published once every file is complete, so a failed run
    leaves the output directory exactly as it found it.
    """

    def __init__(
        self,
        utilities: UtilitiesBundle,
        strategies: Dict[str, MethodStrategy],
        experiment: ExperimentConfig,
        workers: int = 1,
    ) -> None:
        self.utilities = utilities
        self.strategies = strategies
        self.experiment = experiment
        self.workers = workers

        self.storage_assistant = StorageAssistant(utilities=self.utilities)
        self.simulation_assistant = SimulationAssistant(utilities=self.utilities, workers=self.workers)
        self.fitting_assistant = FittingAssistant(strategies=self.strategies, utilities=self.utilities)
        self.evaluation_assistant = EvaluationAssistant(
            utilities=self.utilities, restarts=experiment.cluster_restarts, seed=experiment.seed
        )

    def _stage(self, name: str, action: Callable[[], T]) -> T:
        try:
            return action()
        except StageError:
            raise
        except Exception as e:
            self.utilities.logger.error(f"Stage '{name}' failed: {e}")
            raise StageError(name, e) from e

    def run_experiment(self) -> ResultBundle:
        output_dir = self.experiment.output_dir
        staging: Optional[str] = None
        try:
            # Step 1: Prepare the output and staging directories
            work_dir = self._stage("prepare", lambda: self.storage_assistant.create_staging_directory(output_dir))
            staging = work_dir

            # Step 2: Simulate or load the datasets
            datasets = self._stage("data", self.acquire_datasets)
            self.utilities.logger.info(f"Prepared {len(datasets)} dataset(s).")

            # Step 3: Fit every method on every dataset
            fits = self._stage("fit", lambda: self.fit_datasets(datasets))
            self.utilities.logger.info(f"Fitted {len(self.strategies)} method(s) on {len(fits)} dataset(s).")

            # Step 4: Compute metrics and communities
            metrics, partitions = self._stage("evaluate", lambda: self.evaluate(datasets, fits))
            self.utilities.logger.info(f"Computed {len(metrics)} metric rows.")

            # Step 5: Assemble the result bundle from the first replicate's primary method
            bundle = self._stage("assemble", lambda: self.assemble_bundle(fits[0], metrics, partitions))

            # Step 6: Write the bundle into the staging directory
            staged = self._stage("emit", lambda: self.storage_assistant.emit_results(bundle, work_dir))

            # Step 7: Replace the previous outputs with the staged files
            self._stage("publish", lambda: self.storage_assistant.publish_results(staged, output_dir))
            self.utilities.logger.info(f"Results written to {output_dir}.")
            return bundle
        finally:
            # Step 8: Remove the staging directory
            if staging is not None:
                self.cleanup_staging(staging)

    # Helper Functions

    def acquire_datasets(self) -> List[Dataset]:
        if self.experiment.scenario is not None:
            return self.simulation_assistant.simulate(
                self.experiment.scenario, self.experiment.replicates, self.experiment.seed
            )
        assert self.experiment.data is not None
        return [self.storage_assistant.load_dataset(self.experiment.data)]

    def fit_datasets(self, datasets: List[Dataset]) -> List[Dict[str, MethodResult]]:
        """
        Fit all methods on each dataset. Replicates run in a thread pool when more than one
        worker is configured and every method is torch-free, since the stochastic engine
        seeds the process-wide torch generator.
        """
        parallel = self.workers > 1 and len(datasets) > 1 and not self._uses_torch()
        if parallel:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(self.fitting_assistant.fit_all, datasets))
        return [self.fitting_assistant.fit_all(dataset) for dataset in datasets]

    def _uses_torch(self) -> bool:
        return self.experiment.engine == "svi" and "calsm" in self.strategies

    def evaluate(
        self, datasets: List[Dataset], fits: List[Dict[str, MethodResult]]
    ) -> Tuple[List[MetricRow], Optional[Partition]]:
        """
        Returns:
            Tuple of (metric rows over all replicates, primary-method partition of the first replicate).
        """
        rows: List[MetricRow] = []
        first_partition: Optional[Partition] = None
        for dataset, results in zip(datasets, fits):
            replicate_rows, partitions = self.evaluation_assistant.evaluate(
                dataset, results, self.experiment.metrics, k=self.experiment.cluster_k
            )
            rows.extend(replicate_rows)
            if first_partition is None and partitions:
                first_partition = partitions.get(self.experiment.primary)
        return rows, first_partition

    def assemble_bundle(
        self, results: Dict[str, MethodResult], metrics: List[MetricRow], partition: Optional[Partition]
    ) -> ResultBundle:
        primary = results[self.experiment.primary]
        return ResultBundle(
            probabilities=primary.probabilities,
            latent_means=primary.latent,
            metrics=metrics,
            seed=self.experiment.seed,
            config=self.experiment.echo,
            report=primary.report,
            cluster_labels=partition.labels if partition is not None else None,
            versions=self.versions(),
            diagnostics={name: values for name, values in primary.extras.items() if np.size(values)},
        )

    @staticmethod
    def versions() -> Dict[str, str]:
        return {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "torch": str(torch.__version__),
        }

    def cleanup_staging(self, staging: str) -> None:
        """
        Removes the staging directory, along with any files a failed run left in it.
        """
        try:
            if self.storage_assistant.remove_directory(staging):
                self.utilities.logger.debug(f"Removed staging directory {staging}.")
        except Exception as e:
            self.utilities.logger.error(f"Error removing staging directory {staging}: {e}")
