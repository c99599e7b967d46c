import itertools

import numpy as np
import pytest

from calsm.services.clustering import cluster_latents, kmeans, kmeans_plus_plus, lloyd, normalize_rows


def exhaustive_objective(x, k):
    best = np.inf
    for assignment in itertools.product(range(k), repeat=x.shape[0]):
        labels = np.array(assignment)
        if len(set(assignment)) != k:
            continue
        total = sum(np.sum((x[labels == c] - x[labels == c].mean(axis=0)) ** 2) for c in range(k))
        best = min(best, total)
    return best


@pytest.mark.parametrize("k", [2, 3])
def test_kmeans_finds_global_optimum_on_small_input(k):
    x = np.random.default_rng(0).normal(size=(8, 2))
    partition = kmeans(x, k, restarts=20, rng=np.random.default_rng(1))
    assert partition.objective == pytest.approx(exhaustive_objective(x, k), rel=1e-9)
    assert set(partition.labels) == set(range(1, k + 1))


def test_lloyd_objective_never_increases():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(60, 3))
    _, _, history = lloyd(x, kmeans_plus_plus(x, 4, rng))
    assert np.all(np.diff(history) <= 1e-12)


def test_kmeans_separates_clear_clusters():
    rng = np.random.default_rng(3)
    x = np.vstack([rng.normal(loc=c, scale=0.05, size=(10, 2)) for c in ([0, 0], [5, 5], [0, 5])])
    labels = kmeans(x, 3, rng=rng).labels
    for block in range(3):
        assert len(set(labels[block * 10 : (block + 1) * 10])) == 1


def test_kmeans_rejects_bad_k():
    with pytest.raises(ValueError):
        kmeans(np.zeros((3, 2)), 4)
    with pytest.raises(ValueError):
        kmeans(np.zeros((3, 2)), 0)


def test_kmeans_is_seeded():
    x = np.random.default_rng(4).normal(size=(30, 2))
    first = kmeans(x, 3, rng=np.random.default_rng(9))
    second = kmeans(x, 3, rng=np.random.default_rng(9))
    np.testing.assert_array_equal(first.labels, second.labels)


def test_normalize_rows_keeps_zero_rows():
    normalized = normalize_rows(np.array([[3.0, 4.0], [0.0, 0.0]]))
    np.testing.assert_allclose(normalized, [[0.6, 0.8], [0.0, 0.0]])


def test_cluster_latents_uses_direction_only():
    x = np.array([[1.0, 0.0], [10.0, 0.0], [0.0, 1.0], [0.0, 7.0]])
    labels = cluster_latents(x, 2, rng=np.random.default_rng(0)).labels
    assert labels[0] == labels[1]
    assert labels[2] == labels[3]
    assert labels[0] != labels[2]
