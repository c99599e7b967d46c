import logging
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import svds

DENSE_SVD_LIMIT = 2000


def _fix_signs(u: np.ndarray, vt: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # Largest-magnitude entry of each left singular vector is made positive.
    pivots = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[pivots, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs, vt * signs[:, None]


def truncated_svd(matrix: np.ndarray, rank: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Rank-`rank` singular value decomposition (u, s, vt) with s sorted in descending order.

    Small matrices go through a dense LAPACK decomposition. Large ones use ARPACK with a
    fixed start vector so the result stays deterministic.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    smallest = min(matrix.shape)
    if rank < 1 or rank > smallest:
        raise ValueError(f"Rank must lie in [1, {smallest}], got {rank}.")

    if smallest <= DENSE_SVD_LIMIT or rank >= smallest - 1:
        u, s, vt = scipy.linalg.svd(matrix, full_matrices=False)
        u, s, vt = u[:, :rank], s[:rank], vt[:rank]
    else:
        v0 = np.full(smallest, 1.0 / np.sqrt(smallest))
        u, s, vt = svds(matrix, k=rank, v0=v0)
        order = np.argsort(s)[::-1]
        u, s, vt = u[:, order], s[order], vt[order]
    u, vt = _fix_signs(u, vt)
    return u, s, vt


def spectral_embedding(
    adjacency: np.ndarray,
    d: int,
    rng: np.random.Generator,
    logger: Optional[logging.Logger] = None,
) -> np.ndarray:
    """
    Top-d eigenvector embedding of the density-centred adjacency matrix.

    Eigenvectors are scaled by the square root of their (non-negative part of the)
    eigenvalue and the whole embedding is divided by its largest row norm, so every row
    norm is at most one. A network without spectral signal (for example an empty graph)
    falls back to a small seeded random start.
    """
    n = adjacency.shape[0]
    y = np.asarray(adjacency, dtype=np.float64)
    density = y.sum() / max(n * (n - 1), 1)
    centred = y - density
    np.fill_diagonal(centred, 0.0)

    eigenvalues, eigenvectors = scipy.linalg.eigh(centred, subset_by_index=[n - d, n - 1])
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues, eigenvectors = eigenvalues[order], eigenvectors[:, order]
    eigenvectors, _ = _fix_signs(eigenvectors, np.zeros((d, 1)))
    embedding = eigenvectors * np.sqrt(np.maximum(eigenvalues, 0.0))

    ceiling = np.max(np.linalg.norm(embedding, axis=1))
    if not np.isfinite(ceiling) or ceiling < 1e-12:
        if logger is not None:
            logger.warning("Spectral initialisation is degenerate; using a seeded random start.")
        embedding = rng.normal(scale=0.1, size=(n, d))
        ceiling = max(float(np.max(np.linalg.norm(embedding, axis=1))), 1.0)
    return embedding / ceiling
