from typing import Dict, Mapping, Union

import numpy as np
from scipy.special import comb
from scipy.stats import pearsonr

from calsm.formats.clustering import Partition
from calsm.utilities.errors import DimensionMismatchError

Labels = Union[Partition, np.ndarray]


def _labels(partition: Labels) -> np.ndarray:
    return partition.labels if isinstance(partition, Partition) else np.asarray(partition)


def rand_index(a: Labels, b: Labels) -> float:
    """
    Unadjusted Rand index: the fraction of unordered node pairs on which the two
    partitions agree (together in both or apart in both).

    Args:
        a (Labels): A Partition or an array of labels.
        b (Labels): Same, over the same nodes.

    Returns:
        float: A value in [0, 1]; 1.0 for fewer than two nodes.

    Raises:
        DimensionMismatchError: If the partitions cover different numbers of nodes.
    """
    left, right = _labels(a), _labels(b)
    if left.shape[0] != right.shape[0]:
        raise DimensionMismatchError("n", int(left.shape[0]), int(right.shape[0]), "rand_index")
    n = left.shape[0]
    if n < 2:
        return 1.0

    _, left_ids = np.unique(left, return_inverse=True)
    _, right_ids = np.unique(right, return_inverse=True)
    contingency = np.zeros((left_ids.max() + 1, right_ids.max() + 1), dtype=np.int64)
    np.add.at(contingency, (left_ids, right_ids), 1)

    total = comb(n, 2, exact=True)
    together_both = int(comb(contingency, 2).sum())
    together_left = int(comb(contingency.sum(axis=1), 2).sum())
    together_right = int(comb(contingency.sum(axis=0), 2).sum())
    agreements = total + 2 * together_both - together_left - together_right
    return agreements / total


def pcc(a: np.ndarray, b: np.ndarray) -> float:
    """
    Pearson correlation of two equal-length vectors.

    Returns:
        float: The correlation in [-1, 1].

    Raises:
        DimensionMismatchError: If the lengths differ.
        ValueError: If fewer than two entries are given or either input is constant.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatchError("length", int(a.shape[0]), int(b.shape[0]), "pcc")
    if a.shape[0] < 2:
        raise ValueError("Pearson correlation needs at least two entries.")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise ValueError("Pearson correlation is undefined for a constant input.")
    return float(pearsonr(a, b)[0])


def upper_triangle_pcc(truth: np.ndarray, estimate: np.ndarray) -> float:
    """PCC over the strict upper triangle of two n x n probability matrices."""
    rows, cols = np.triu_indices(truth.shape[0], k=1)
    return pcc(truth[rows, cols], estimate[rows, cols])


def diff_metric(scores: Mapping[str, float]) -> Dict[str, float]:
    """
    Each method's score minus the unweighted mean over all methods.

    Raises:
        ValueError: If fewer than two methods are given.
    """
    if len(scores) < 2:
        raise ValueError("Diff metrics need scores from at least two methods.")
    centre = float(np.mean(list(scores.values())))
    return {method: float(score) - centre for method, score in scores.items()}
