from typing import List, Optional, Tuple

import numpy as np

from calsm.formats.clustering import Partition

MAX_LLOYD_ITERATIONS = 300


def normalize_rows(x: np.ndarray) -> np.ndarray:
    """Scale each nonzero row to unit Euclidean norm; zero rows stay zero."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)


def _squared_distances(x: np.ndarray, centres: np.ndarray) -> np.ndarray:
    return np.sum((x[:, None, :] - centres[None, :, :]) ** 2, axis=2)


def kmeans_plus_plus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: each new centre is drawn with probability proportional to D^2."""
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    closest = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            remaining = np.setdiff1d(np.arange(n), chosen)
            pick = int(rng.choice(remaining)) if remaining.size else int(rng.integers(n))
        else:
            pick = int(rng.choice(n, p=closest / total))
        chosen.append(pick)
        closest = np.minimum(closest, np.sum((x - x[pick]) ** 2, axis=1))
    return x[chosen].copy()


def lloyd(
    x: np.ndarray, centres: np.ndarray, max_iterations: int = MAX_LLOYD_ITERATIONS
) -> Tuple[np.ndarray, np.ndarray, List[float]]:
    """
    Lloyd iterations from the given centres.

    An empty cluster is reseeded at the point farthest from its current centre.

    Returns:
        Tuple of (0-based labels, centres, objective after every assignment step).
    """
    centres = centres.copy()
    history: List[float] = []
    labels: Optional[np.ndarray] = None
    for _ in range(max_iterations):
        distances = _squared_distances(x, centres)
        new_labels = np.argmin(distances, axis=1)
        history.append(float(distances[np.arange(x.shape[0]), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for cluster in range(centres.shape[0]):
            members = labels == cluster
            if np.any(members):
                centres[cluster] = x[members].mean(axis=0)
            else:
                farthest = int(np.argmax(distances[np.arange(x.shape[0]), labels]))
                centres[cluster] = x[farthest]
                labels[farthest] = cluster
                distances[farthest] = _squared_distances(x[farthest : farthest + 1], centres)[0]
    assert labels is not None
    return labels, centres, history


def kmeans(x: np.ndarray, k: int, restarts: int = 20, rng: Optional[np.random.Generator] = None) -> Partition:
    """
    Best of `restarts` k-means++ seeded Lloyd runs by within-cluster sum of squares.

    Args:
        x (np.ndarray): n x d points.
        k (int): Number of clusters.
        restarts (int): Independent seedings; at least one is run.
        rng (Optional[np.random.Generator]): Source of the seedings, seeded with 0 when omitted.

    Returns:
        Partition: Labels in 1..k and the winning objective.

    Raises:
        ValueError: If k is not in [1, n].
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"Number of clusters must lie in [1, n={n}], got {k}.")
    rng = rng if rng is not None else np.random.default_rng(0)

    best: Optional[Tuple[float, np.ndarray]] = None
    for _ in range(max(restarts, 1)):
        labels, _, history = lloyd(x, kmeans_plus_plus(x, k, rng))
        objective = history[-1]
        if best is None or objective < best[0]:
            best = (objective, labels)
    assert best is not None
    return Partition(labels=best[1] + 1, k=k, objective=best[0])


def cluster_latents(x: np.ndarray, k: int, restarts: int = 20, rng: Optional[np.random.Generator] = None) -> Partition:
    """Community detection on latent vectors: normalize_rows followed by kmeans."""
    return kmeans(normalize_rows(x), k, restarts=restarts, rng=rng)
