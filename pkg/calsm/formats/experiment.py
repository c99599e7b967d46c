from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, TypedDict

import numpy as np

from calsm.formats.cavi import FitOptions, FitReport
from calsm.formats.covariates import Covariates
from calsm.formats.model import ModelConfig
from calsm.formats.network import Network
from calsm.formats.simulation import SimScenario, SimTruth
from calsm.formats.svi import SviConfig

ENGINES = ("cavi", "svi")
METRICS = ("pcc", "pcc_diff", "ri", "ri_diff")
BASELINES = ("lsm", "svd_y", "svd_yz", "svd_yzo")
NETWORK_FORMATS = ("edge_list", "dense_csv")


class MetricRow(TypedDict):
    replicate: int
    method: str
    metric: str
    value: float


@dataclass(frozen=True)
class DataSource:
    network_path: str
    network_format: str = "edge_list"
    covariates_path: Optional[str] = None
    normalize_covariates: bool = False
    labels_path: Optional[str] = None


@dataclass
class ExperimentConfig:
    """
    Everything one run needs. Exactly one of `scenario` (simulate) or `data` (load from
    files) is set. `primary` names the method whose arrays go into the bundle: "calsm" for
    the chosen engine, or a baseline name when a baseline runs alone.
    """

    model: ModelConfig
    engine: str = "cavi"
    primary: str = "calsm"
    fit_options: FitOptions = field(default_factory=FitOptions)
    svi: SviConfig = field(default_factory=SviConfig)
    scenario: Optional[SimScenario] = None
    data: Optional[DataSource] = None
    metrics: List[str] = field(default_factory=lambda: ["pcc"])
    baselines: List[str] = field(default_factory=list)
    cluster_k: Optional[int] = None
    cluster_restarts: int = 20
    replicates: int = 1
    output_dir: str = "results"
    seed: int = 0
    echo: Dict[str, Any] = field(default_factory=dict)

    @property
    def methods(self) -> List[str]:
        return [self.primary] + [name for name in self.baselines if name != self.primary]


@dataclass
class MethodResult:
    """What every method hands back: link probabilities, latent vectors and, for the engines, a fit report."""

    method: str
    probabilities: np.ndarray
    latent: np.ndarray
    report: Optional[FitReport] = None
    extras: Dict[str, np.ndarray] = field(default_factory=dict)


@dataclass(eq=False)
class ResultBundle:
    """
    Outputs of one run. Arrays belong to the main method on the first replicate; the
    metric table covers every replicate and method. When the probability matrix is
    emitted in thresholded sparse form, `threshold` records the cut. `diagnostics` holds
    the main method's extra per-node or per-covariate arrays.
    """

    probabilities: np.ndarray
    latent_means: np.ndarray
    metrics: List[MetricRow]
    seed: int
    config: Dict[str, Any] = field(default_factory=dict)
    report: Optional[FitReport] = None
    cluster_labels: Optional[np.ndarray] = None
    versions: Dict[str, str] = field(default_factory=dict)
    threshold: Optional[float] = None
    diagnostics: Dict[str, np.ndarray] = field(default_factory=dict)

    def matches(self, other: "ResultBundle", rtol: float = 1e-10, atol: float = 1e-12) -> bool:
        """Equality up to the text precision the bundle is written with."""

        def close(a: Optional[np.ndarray], b: Optional[np.ndarray]) -> bool:
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and bool(np.allclose(a, b, rtol=rtol, atol=atol))

        same_metrics = len(self.metrics) == len(other.metrics) and all(
            left["replicate"] == right["replicate"]
            and left["method"] == right["method"]
            and left["metric"] == right["metric"]
            and np.isclose(left["value"], right["value"], rtol=rtol, atol=atol)
            for left, right in zip(self.metrics, other.metrics)
        )
        labels_match = (self.cluster_labels is None and other.cluster_labels is None) or (
            self.cluster_labels is not None
            and other.cluster_labels is not None
            and np.array_equal(self.cluster_labels, other.cluster_labels)
        )
        return (
            self.seed == other.seed
            and self.config == other.config
            and self.report == other.report
            and self.versions == other.versions
            and self.threshold == other.threshold
            and same_metrics
            and labels_match
            and close(self.probabilities, other.probabilities)
            and close(self.latent_means, other.latent_means)
            and self.diagnostics.keys() == other.diagnostics.keys()
            and all(close(value, other.diagnostics[name]) for name, value in self.diagnostics.items())
        )


@dataclass
class Dataset:
    """
    One replicate's inputs. Simulated datasets carry their generating truth; loaded ones
    may carry reference labels only.
    """

    replicate: int
    network: Network
    covariates: Covariates
    truth: Optional[SimTruth] = None
    labels: Optional[np.ndarray] = None

    @property
    def true_probabilities(self) -> Optional[np.ndarray]:
        return self.truth.true_probabilities() if self.truth is not None else None
