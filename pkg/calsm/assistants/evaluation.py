from typing import Dict, List, Optional, Tuple

import numpy as np

from calsm.formats.clustering import Partition
from calsm.formats.experiment import Dataset, MethodResult, MetricRow
from calsm.services.clustering import cluster_latents
from calsm.services.metrics import diff_metric, rand_index, upper_triangle_pcc
from calsm.services.simulation import derive_seed
from calsm.utilities.bundle import UtilitiesBundle


class EvaluationAssistant:
    """
    Scores fitted methods against the truth of a dataset.

    PCC compares fitted and true link probabilities; RI compares k-means communities of
    the normalised latent vectors with the reference labels. The Diff variants subtract
    the cross-method mean on the same dataset.
    """

    def __init__(self, utilities: UtilitiesBundle, restarts: int = 20, seed: int = 0) -> None:
        self.utilities = utilities
        self.restarts = restarts
        self.seed = seed

    def cluster(self, result: MethodResult, k: int, replicate: int) -> Partition:
        rng = np.random.default_rng(derive_seed(self.seed, {"method": result.method}, replicate))
        return cluster_latents(result.latent, k, restarts=self.restarts, rng=rng)

    def _pcc_scores(self, dataset: Dataset, results: Dict[str, MethodResult]) -> Dict[str, float]:
        truth = dataset.true_probabilities
        assert truth is not None
        scores = {}
        for name, result in results.items():
            try:
                scores[name] = upper_triangle_pcc(truth, result.probabilities)
            except ValueError as e:
                self.utilities.logger.warning(f"PCC undefined for {name} on replicate {dataset.replicate}: {e}")
                scores[name] = float("nan")
        return scores

    def _ri_scores(self, dataset: Dataset, partitions: Dict[str, Partition]) -> Dict[str, float]:
        assert dataset.labels is not None
        return {name: rand_index(partition, dataset.labels) for name, partition in partitions.items()}

    def evaluate(
        self,
        dataset: Dataset,
        results: Dict[str, MethodResult],
        metrics: List[str],
        k: Optional[int] = None,
    ) -> Tuple[List[MetricRow], Dict[str, Partition]]:
        """
        Compute the requested metrics for every method.

        Returns:
            Tuple of (metric rows ordered by metric then method, partitions per method).
        """
        partitions: Dict[str, Partition] = {}
        wants_ri = any(metric.startswith("ri") for metric in metrics)
        if k is not None or wants_ri:
            cluster_count = k if k is not None else int(np.unique(dataset.labels).size)
            partitions = {name: self.cluster(result, cluster_count, dataset.replicate) for name, result in results.items()}

        computed: Dict[str, Dict[str, float]] = {}
        if any(metric.startswith("pcc") for metric in metrics):
            computed["pcc"] = self._pcc_scores(dataset, results)
            if "pcc_diff" in metrics:
                computed["pcc_diff"] = diff_metric(computed["pcc"])
        if wants_ri:
            computed["ri"] = self._ri_scores(dataset, partitions)
            if "ri_diff" in metrics:
                computed["ri_diff"] = diff_metric(computed["ri"])

        rows: List[MetricRow] = []
        for metric in metrics:
            for method in results:
                rows.append(
                    MetricRow(replicate=dataset.replicate, method=method, metric=metric, value=computed[metric][method])
                )
        self.utilities.logger.debug(f"Replicate {dataset.replicate}: {len(rows)} metric rows")
        return rows, partitions
