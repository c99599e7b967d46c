from typing import Iterable, Optional, Tuple

import numpy as np


class Network:
    """
    An undirected binary network over n nodes.

    Holds both the dense symmetric 0/1 adjacency matrix and the positive-edge list
    (pairs i<j with Y_ij=1). The adjacency diagonal is always stored as zero. With
    include_diagonal set, the observed self-loops are kept in `loops` and log_likelihood
    scores them as well; the inference engines only ever use pairs i<j.
    """

    def __init__(self, adjacency: np.ndarray, include_diagonal: bool = False) -> None:
        adjacency = np.asarray(adjacency)
        if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
            raise ValueError(f"Adjacency must be a square matrix, got shape {adjacency.shape}.")
        if not np.all((adjacency == 0) | (adjacency == 1)):
            raise ValueError("Adjacency entries must be 0 or 1.")
        if not np.array_equal(adjacency, adjacency.T):
            raise ValueError("Adjacency must be symmetric.")

        self.n: int = int(adjacency.shape[0])
        self.adjacency: np.ndarray = adjacency.astype(np.int8)
        self.include_diagonal = include_diagonal
        self.loops: np.ndarray = (
            np.diag(self.adjacency).copy() if include_diagonal else np.zeros(self.n, dtype=np.int8)
        )
        np.fill_diagonal(self.adjacency, 0)
        rows, cols = np.nonzero(np.triu(self.adjacency, k=1))
        self.positive_edges: np.ndarray = np.stack([rows, cols], axis=1).astype(np.int64)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Tuple[int, int]]) -> "Network":
        """Build a network from (i, j) pairs; pairs are symmetrized and self-loops ignored."""
        adjacency = np.zeros((n, n), dtype=np.int8)
        for i, j in edges:
            if i != j:
                adjacency[i, j] = 1
                adjacency[j, i] = 1
        return cls(adjacency)

    @property
    def num_edges(self) -> int:
        """|E+|: number of unordered positive pairs."""
        return int(self.positive_edges.shape[0])

    @property
    def num_pairs(self) -> int:
        return self.n * (self.n - 1) // 2

    @property
    def num_non_edges(self) -> int:
        """|E-|: number of unordered i<j non-edges."""
        return self.num_pairs - self.num_edges

    def upper_triangle(self, matrix: Optional[np.ndarray] = None) -> np.ndarray:
        """Vectorize the strict upper triangle of `matrix` (the adjacency by default)."""
        target = self.adjacency if matrix is None else matrix
        rows, cols = np.triu_indices(self.n, k=1)
        return np.asarray(target[rows, cols])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Network):
            return NotImplemented
        return (
            self.include_diagonal == other.include_diagonal
            and np.array_equal(self.loops, other.loops)
            and np.array_equal(self.adjacency, other.adjacency)
        )

    def __repr__(self) -> str:
        return f"Network(n={self.n}, edges={self.num_edges})"
