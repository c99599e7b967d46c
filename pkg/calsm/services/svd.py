import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from calsm.formats.clustering import RankDApprox
from calsm.formats.covariates import Covariates
from calsm.formats.network import Network
from calsm.helpers.linalg import truncated_svd
from calsm.utilities.errors import DimensionMismatchError

_default_logger = logging.getLogger("calsm_logger")


def svd_y(net: Network, d: int) -> Tuple[RankDApprox, np.ndarray]:
    """Best rank-d approximation of the 0/1 adjacency and its reconstruction."""
    u, s, vt = truncated_svd(net.adjacency, d)
    approx = RankDApprox(u=u, s=s, v=vt.T)
    return approx, approx.reconstruct()


def scaled_covariates(cov: Covariates, support: Optional[Sequence[int]] = None) -> np.ndarray:
    """Z (optionally restricted to `support` columns) divided by its global max absolute entry."""
    z = cov.z if support is None else cov.z[:, list(support)]
    ceiling = np.max(np.abs(z)) if z.size else 0.0
    return z / ceiling if ceiling > 0 else np.zeros_like(z)


def svd_yz(
    net: Network,
    cov: Covariates,
    d: int,
    oracle_support: Optional[Sequence[int]] = None,
    logger: Optional[logging.Logger] = None,
) -> Tuple[RankDApprox, np.ndarray]:
    """
    Rank-d SVD of the concatenation [Y, Z~] with Z~ = Z / max|Z|; the leading n x n block
    of the reconstruction is the probability estimate.

    Passing `oracle_support` keeps only those covariate columns. An empty support falls
    back to svd_y with a warning.

    Args:
        net (Network): The observed network.
        cov (Covariates): Node covariates.
        d (int): Rank of the approximation.
        oracle_support (Optional[Sequence[int]]): Covariate columns to keep.
        logger (Optional[logging.Logger]): Defaults to the package logger.

    Returns:
        Tuple[RankDApprox, np.ndarray]: The truncated factorisation and the n x n estimate.

    Raises:
        DimensionMismatchError: If the covariates do not cover every node.
    """
    logger = logger if logger is not None else _default_logger
    if cov.n != net.n:
        raise DimensionMismatchError("n", net.n, cov.n, "svd_yz covariates")
    if oracle_support is not None and len(oracle_support) == 0:
        logger.warning("Oracle support is empty; SVDyz degenerates to SVDy.")
        return svd_y(net, d)

    augmented = np.hstack([net.adjacency.astype(np.float64), scaled_covariates(cov, oracle_support)])
    u, s, vt = truncated_svd(augmented, d)
    approx = RankDApprox(u=u, s=s, v=vt.T)
    return approx, approx.reconstruct()[:, : net.n]
