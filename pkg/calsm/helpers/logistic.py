"""Logistic link, Bernoulli log-likelihood and the Jaakkola-Jordan tangent bound."""

from typing import Optional, Union

import numpy as np
from scipy import stats
from scipy.special import expit, log_expit

from calsm.formats.model import LatentParams, ModelConfig
from calsm.formats.network import Network
from calsm.utilities.errors import DimensionMismatchError

ArrayLike = Union[float, np.ndarray]

JJ_SMALL_XI = 1e-8


def logistic(x: ArrayLike) -> ArrayLike:
    """1 / (1 + exp(-x)), stable over the whole float range."""
    return expit(x)


def log_logistic(x: ArrayLike) -> ArrayLike:
    """log(logistic(x)) without underflow for large negative x."""
    return log_expit(x)


def linear_predictor(beta: float, x: np.ndarray) -> np.ndarray:
    """eta_ij = beta + x_i'x_j for every pair, as a dense n x n matrix."""
    return beta + x @ x.T


def log_likelihood(net: Network, params: LatentParams, cfg: ModelConfig) -> float:
    """
    Fractional Bernoulli log-likelihood alpha * sum_{i<j} [y log s(eta) + (1-y) log(1-s(eta))].

    The diagonal is added only when the network models self-loops.

    Raises:
        DimensionMismatchError: If the latent matrix disagrees with the network size or d.
    """
    x = np.asarray(params.x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != net.n:
        raise DimensionMismatchError("n", net.n, int(x.shape[0]) if x.ndim else 0, "latent positions")
    if x.shape[1] != cfg.d:
        raise DimensionMismatchError("d", cfg.d, int(x.shape[1]), "latent positions")

    eta = linear_predictor(params.beta, x)
    y = net.adjacency
    terms = np.where(y == 1, log_expit(eta), log_expit(-eta))
    total = np.sum(np.triu(terms, k=1))
    if net.include_diagonal:
        self_eta = np.diag(eta)
        total += np.sum(np.where(net.loops == 1, log_expit(self_eta), log_expit(-self_eta)))
    return float(cfg.alpha * total)


def jj_coefficient(xi: ArrayLike) -> ArrayLike:
    """
    A(xi) = tanh(xi/2) / (4 xi), with the limit 1/8 below 1e-8.

    Raises:
        ValueError: If any xi is negative.
    """
    xi_arr = np.asarray(xi, dtype=np.float64)
    if np.any(xi_arr < 0):
        raise ValueError("Tangent parameter xi must be non-negative.")
    small = xi_arr < JJ_SMALL_XI
    safe = np.where(small, 1.0, xi_arr)
    coefficient = np.where(small, 0.125, np.tanh(safe / 2.0) / (4.0 * safe))
    if np.ndim(xi) == 0:
        return float(coefficient)
    return coefficient


def jj_lower_bound(eta: ArrayLike, xi: ArrayLike) -> ArrayLike:
    """
    log s(xi) + (eta - xi)/2 - A(xi)(eta^2 - xi^2), a quadratic lower bound on log s(eta)
    that is tight at xi = |eta|.
    """
    eta_arr = np.asarray(eta, dtype=np.float64)
    xi_arr = np.asarray(xi, dtype=np.float64)
    bound = log_expit(xi_arr) + (eta_arr - xi_arr) / 2.0 - jj_coefficient(xi_arr) * (eta_arr**2 - xi_arr**2)
    if np.ndim(eta) == 0 and np.ndim(xi) == 0:
        return float(bound)
    return bound


def sample_half_cauchy_via_inverse_gamma(size: int, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    Draw half-Cauchy(0, 1) scales through the inverse-gamma mixture
    v ~ IG(1/2, 1), lambda^2 | v ~ IG(1/2, 1/v).
    """
    rng = rng if rng is not None else np.random.default_rng()
    v = stats.invgamma.rvs(0.5, scale=1.0, size=size, random_state=rng)
    lambda_sq = stats.invgamma.rvs(0.5, scale=1.0 / v, size=size, random_state=rng)
    return np.sqrt(lambda_sq)
