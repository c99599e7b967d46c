from dataclasses import dataclass

import numpy as np


@dataclass
class Partition:
    """Cluster assignment with 1-based labels in [1..k]; objective is the within-cluster sum of squares."""

    labels: np.ndarray
    k: int
    objective: float = 0.0

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.k < 1:
            raise ValueError(f"A partition needs at least one cluster, got k={self.k}.")
        if self.labels.size and (self.labels.min() < 1 or self.labels.max() > self.k):
            raise ValueError(f"Labels must lie in [1, {self.k}].")


@dataclass
class RankDApprox:
    """Truncated SVD factors: u (n x d), s (d, descending), v (m x d)."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.v.T

    def embedding(self) -> np.ndarray:
        """Row embedding u * sqrt(s), used as latent vectors for clustering."""
        return self.u * np.sqrt(self.s)
