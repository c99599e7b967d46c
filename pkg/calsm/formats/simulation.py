import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple, TypedDict

import numpy as np

from calsm.formats.covariates import Covariates
from calsm.formats.network import Network
from calsm.helpers.logistic import logistic

PROBABILITY_VALUES = (-2.0, 2.0, -1.5, 1.5)
COMMUNITY_VALUES = (-1.0, 1.0)
COVARIATE_KINDS = ("gaussian", "binary")


@dataclass(frozen=True)
class SimScenario:
    """
    Declarative description of one synthetic experiment.

    case picks the default number of mismatched rows (1: none, 2: five, 3: all).
    mismatch_ratio, when set, overrides it with round(n * ratio) rows and mismatch_count
    overrides both. Mismatched rows are redrawn from Uniform[-2, 2] or, in the community
    variant, permuted among themselves.
    """

    case: int = 1
    n: int = 200
    p: int = 100
    d: int = 2
    s_b: int = 5
    beta_star: float = -2.0
    k: float = 2.0
    mismatch_count: Optional[int] = None
    mismatch_ratio: Optional[float] = None
    covariate_kind: str = "gaussian"
    community_variant: bool = False
    value_set: Tuple[float, ...] = PROBABILITY_VALUES
    seed: int = 0

    def __post_init__(self) -> None:
        if self.case not in (1, 2, 3):
            raise ValueError(f"case must be 1, 2 or 3, got {self.case}.")
        if min(self.n, self.p, self.d) < 0 or self.n < 1 or self.d < 1:
            raise ValueError(f"Invalid sizes n={self.n}, p={self.p}, d={self.d}.")
        if not 0 <= self.s_b <= self.p:
            raise ValueError(f"s_b must lie in [0, p={self.p}], got {self.s_b}.")
        if self.k <= 0:
            raise ValueError(f"Signal strength k must be positive, got {self.k}.")
        if self.covariate_kind not in COVARIATE_KINDS:
            raise ValueError(f"covariate_kind must be one of {COVARIATE_KINDS}, got {self.covariate_kind}.")
        if self.mismatch_ratio is not None and not 0.0 <= self.mismatch_ratio <= 1.0:
            raise ValueError(f"mismatch_ratio must lie in [0, 1], got {self.mismatch_ratio}.")
        if not 0 <= self.resolved_mismatch_count() <= self.n:
            raise ValueError(f"Mismatch count must lie in [0, n={self.n}], got {self.resolved_mismatch_count()}.")

    @classmethod
    def community(cls, **overrides: Any) -> "SimScenario":
        """
        Binary-covariate community-detection variant with four active coefficient rows. The
        mismatch count follows the case as usual, so case 3 permutes every row of Z B*.
        """
        settings: Dict[str, Any] = dict(
            covariate_kind="binary", community_variant=True, s_b=4, value_set=COMMUNITY_VALUES
        )
        settings.update(overrides)
        return cls(**settings)

    def resolved_mismatch_count(self) -> int:
        if self.mismatch_count is not None:
            return self.mismatch_count
        if self.mismatch_ratio is not None:
            return int(math.floor(self.n * self.mismatch_ratio + 0.5))
        return {1: 0, 2: min(5, self.n), 3: self.n}[self.case]

    def with_seed(self, seed: int) -> "SimScenario":
        return replace(self, seed=seed)

    def to_dict(self) -> Dict[str, Any]:
        record = asdict(self)
        record["value_set"] = list(self.value_set)
        return record


@dataclass
class SimTruth:
    scenario: SimScenario
    z: Covariates
    b_star: np.ndarray
    x_star: np.ndarray
    network: Network
    mismatched_rows: np.ndarray
    true_labels: Optional[np.ndarray] = None

    def true_probabilities(self) -> np.ndarray:
        return logistic(self.scenario.beta_star + self.x_star @ self.x_star.T)

    def support(self) -> np.ndarray:
        """Indices of the nonzero rows of B*."""
        return np.flatnonzero(np.any(self.b_star != 0, axis=1))


class ManifestRow(TypedDict):
    cell: int
    replicate: int
    derived_seed: int
    scenario: Dict[str, Any]
    network_path: str
    covariates_path: str


@dataclass
class ScenarioGrid:
    """Cross product of scenario settings, e.g. {"k": [1, 2], "case": [1, 3]}, times replicates."""

    base: SimScenario
    axes: Dict[str, List[Any]] = field(default_factory=dict)
    replicates: int = 1
    master_seed: int = 0
