import csv
import json
import os
from dataclasses import asdict
from typing import Any, Dict, List, Optional

import numpy as np

from calsm.formats.cavi import FitReport
from calsm.formats.experiment import MetricRow, ResultBundle
from calsm.utilities.bundle import UtilitiesBundle

METRICS_FILE = "metrics.tsv"
LATENT_FILE = "latent_means.csv"
PROBABILITIES_FILE = "probabilities.csv"
SPARSE_PROBABILITIES_FILE = "probabilities_sparse.tsv"
LABELS_FILE = "cluster_labels.csv"
REPORT_FILE = "report.json"
DIAGNOSTIC_NAMES = ("node_mismatch_scores", "covariate_importance", "covariate_share", "coefficient_means")
METRIC_COLUMNS = ("replicate", "method", "metric", "value")
NUMBER_FORMAT = "%.12g"
SPARSE_NODE_LIMIT = 5000
DEFAULT_SPARSE_QUANTILE = 0.99


def _format(value: float) -> str:
    return NUMBER_FORMAT % value


class ResultsManager:
    """
    Writes a ResultBundle as plain files and parses them back.

    Numbers are written with 12 significant digits. Every text file starts with a
    "# seed=<seed>" comment; report.json carries the seed as a key. Probability matrices
    for networks with more than 5000 nodes are stored as (i, j, p) triples above an
    upper quantile of the strict upper triangle, and the cut is stored as `threshold`.
    Each non-empty diagnostic array is written to "<name>.csv", one row per node or
    covariate, and its shape is recorded under "diagnostics" in report.json.

    Attributes:
        utilities (UtilitiesBundle): A bundle of utility instances including logging and config utilities.
    """

    def __init__(self, utilities: UtilitiesBundle) -> None:
        self.utilities: UtilitiesBundle = utilities
        self.sparse_quantile: float = float(
            self.utilities.config_utility.get_with_default("output.sparse_quantile", DEFAULT_SPARSE_QUANTILE)
        )

    def output_paths(self, directory: str) -> List[str]:
        """Every file emit_results may create in `directory`."""
        names = (METRICS_FILE, LATENT_FILE, PROBABILITIES_FILE, SPARSE_PROBABILITIES_FILE, LABELS_FILE, REPORT_FILE)
        diagnostics = tuple(f"{name}.csv" for name in DIAGNOSTIC_NAMES)
        return [os.path.join(directory, name) for name in names + diagnostics]

    def emit_results(self, bundle: ResultBundle, directory: str) -> List[str]:
        """
        Write the bundle into `directory`, overwriting earlier files of the same names.

        Returns:
            List[str]: Paths of the files written.

        Raises:
            OSError: If a file cannot be written; the message names the path.
        """
        os.makedirs(directory, exist_ok=True)
        # Files from an earlier run would otherwise mix with this bundle on load.
        for stale in self.output_paths(directory):
            if os.path.exists(stale):
                os.remove(stale)
        written: List[str] = []
        seed_header = f"seed={bundle.seed}"

        if bundle.metrics:
            path = os.path.join(directory, METRICS_FILE)
            self._write(path, lambda handle: self._write_metrics(handle, bundle.metrics, seed_header))
            written.append(path)

        path = os.path.join(directory, LATENT_FILE)
        self._savetxt(path, bundle.latent_means, seed_header)
        written.append(path)

        n = bundle.probabilities.shape[0]
        if n > SPARSE_NODE_LIMIT:
            path = os.path.join(directory, SPARSE_PROBABILITIES_FILE)
            bundle.threshold = self._write_sparse(path, bundle.probabilities, seed_header)
        else:
            path = os.path.join(directory, PROBABILITIES_FILE)
            self._savetxt(path, bundle.probabilities, seed_header)
        written.append(path)

        if bundle.cluster_labels is not None:
            path = os.path.join(directory, LABELS_FILE)
            self._savetxt(path, bundle.cluster_labels.reshape(-1, 1), seed_header, fmt="%d")
            written.append(path)

        shapes: Dict[str, List[int]] = {}
        for name, values in sorted(bundle.diagnostics.items()):
            values = np.asarray(values, dtype=np.float64)
            if name not in DIAGNOSTIC_NAMES or values.size == 0:
                self.utilities.logger.warning(f"Skipping diagnostic {name} with shape {values.shape}")
                continue
            path = os.path.join(directory, f"{name}.csv")
            self._savetxt(path, values.reshape(values.shape[0], -1), seed_header)
            shapes[name] = list(values.shape)
            written.append(path)

        path = os.path.join(directory, REPORT_FILE)
        document = {
            "seed": bundle.seed,
            "diagnostics": shapes,
            "n": n,
            "threshold": bundle.threshold,
            "report": self._report_to_dict(bundle.report),
            "config": bundle.config,
            "versions": bundle.versions,
        }
        self._write(path, lambda handle: handle.write(json.dumps(document, indent=2, sort_keys=True) + "\n"))
        written.append(path)

        self.utilities.logger.info(f"Results written to {directory} ({len(written)} files)")
        return written

    def publish_results(self, staged: List[str], directory: str) -> List[str]:
        """
        Move staged result files into `directory`, replacing the outputs of any earlier run.

        Args:
            staged (List[str]): Paths returned by emit_results for a staging directory.
            directory (str): The final output directory.

        Returns:
            List[str]: The published paths.

        Raises:
            OSError: If a stale output cannot be removed or a staged file cannot be moved.
        """
        published: List[str] = []
        try:
            for stale in self.output_paths(directory):
                if os.path.exists(stale):
                    os.remove(stale)
            for path in staged:
                target = os.path.join(directory, os.path.basename(path))
                os.replace(path, target)
                published.append(target)
        except OSError as e:
            self.utilities.logger.error(f"Error publishing results to {directory}: {e}")
            raise
        self.utilities.logger.info(f"Published {len(published)} result file(s) to {directory}")
        return published

    def _write(self, path: str, writer: Any) -> None:
        try:
            with open(path, "w", encoding="utf-8", newline="") as handle:
                writer(handle)
        except OSError as e:
            self.utilities.logger.error(f"Error writing {path}: {e}")
            raise OSError(f"Could not write {path}: {e}") from e

    def _savetxt(self, path: str, matrix: np.ndarray, header: str, fmt: str = NUMBER_FORMAT) -> None:
        self._write(path, lambda handle: np.savetxt(handle, matrix, fmt=fmt, delimiter=",", header=header))

    @staticmethod
    def _write_metrics(handle: Any, rows: List[MetricRow], seed_header: str) -> None:
        handle.write(f"# {seed_header}\n")
        writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
        writer.writerow(METRIC_COLUMNS)
        for row in rows:
            writer.writerow([row["replicate"], row["method"], row["metric"], _format(row["value"])])

    def _write_sparse(self, path: str, probabilities: np.ndarray, seed_header: str) -> float:
        rows, cols = np.triu_indices(probabilities.shape[0], k=1)
        values = probabilities[rows, cols]
        threshold = float(np.quantile(values, self.sparse_quantile))
        keep = values >= threshold
        self.utilities.logger.info(
            f"Writing {int(np.count_nonzero(keep))} of {values.size} probabilities above threshold {threshold:.6g}"
        )

        def write(handle: Any) -> None:
            handle.write(f"# {seed_header} threshold={_format(threshold)}\n")
            for i, j, value in zip(rows[keep], cols[keep], values[keep]):
                handle.write(f"{i}\t{j}\t{_format(value)}\n")

        self._write(path, write)
        return threshold

    @staticmethod
    def _report_to_dict(report: Optional[FitReport]) -> Optional[Dict[str, Any]]:
        if report is None:
            return None
        record = asdict(report)
        # wall_time differs between identical runs.
        record.pop("wall_time")
        return record

    def load_results(self, directory: str) -> ResultBundle:
        """
        Parse files written by emit_results back into a ResultBundle.

        Sparse probability files are expanded to a dense symmetric matrix with zeros
        below the threshold.
        """
        with open(os.path.join(directory, REPORT_FILE), "r", encoding="utf-8") as handle:
            document = json.load(handle)

        metrics: List[MetricRow] = []
        metrics_path = os.path.join(directory, METRICS_FILE)
        if os.path.exists(metrics_path):
            with open(metrics_path, "r", encoding="utf-8", newline="") as handle:
                lines = [line for line in handle if not line.startswith("#")]
            for record in csv.DictReader(lines, delimiter="\t"):
                metrics.append(
                    MetricRow(
                        replicate=int(record["replicate"]),
                        method=record["method"],
                        metric=record["metric"],
                        value=float(record["value"]),
                    )
                )

        latent = np.loadtxt(os.path.join(directory, LATENT_FILE), delimiter=",", ndmin=2)
        n = int(document["n"])
        dense_path = os.path.join(directory, PROBABILITIES_FILE)
        if os.path.exists(dense_path):
            probabilities = np.loadtxt(dense_path, delimiter=",", ndmin=2).reshape(n, n)
        else:
            probabilities = np.zeros((n, n))
            triples = np.loadtxt(os.path.join(directory, SPARSE_PROBABILITIES_FILE), delimiter="\t", ndmin=2)
            if triples.size:
                i, j = triples[:, 0].astype(np.int64), triples[:, 1].astype(np.int64)
                probabilities[i, j] = triples[:, 2]
                probabilities[j, i] = triples[:, 2]

        labels_path = os.path.join(directory, LABELS_FILE)
        labels = np.loadtxt(labels_path, delimiter=",", dtype=np.int64, ndmin=1) if os.path.exists(labels_path) else None

        diagnostics = {
            name: np.loadtxt(os.path.join(directory, f"{name}.csv"), delimiter=",", ndmin=2).reshape(shape)
            for name, shape in document.get("diagnostics", {}).items()
        }

        report = FitReport(**document["report"]) if document["report"] is not None else None
        return ResultBundle(
            probabilities=probabilities,
            latent_means=latent,
            metrics=metrics,
            seed=int(document["seed"]),
            config=document["config"],
            report=report,
            cluster_labels=labels,
            versions=document["versions"],
            threshold=document["threshold"],
            diagnostics=diagnostics,
        )
