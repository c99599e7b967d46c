from unittest.mock import MagicMock

import numpy as np
import pytest

from calsm.formats.covariates import Covariates
from calsm.formats.network import Network
from calsm.services.svd import scaled_covariates, svd_y, svd_yz
from calsm.utilities.errors import DimensionMismatchError


@pytest.fixture
def network():
    rng = np.random.default_rng(0)
    upper = np.triu(rng.random((20, 20)) < 0.3, k=1)
    return Network((upper | upper.T).astype(np.int8))


def test_svd_y_error_matches_eckart_young(network):
    approx, reconstruction = svd_y(network, 3)
    singular_values = np.linalg.svd(network.adjacency.astype(float), compute_uv=False)
    error = np.linalg.norm(network.adjacency - reconstruction, "fro") ** 2
    assert error == pytest.approx(np.sum(singular_values[3:] ** 2), rel=1e-9)
    assert np.all(np.diff(approx.s) <= 0)


def test_svd_yz_returns_n_by_n_block(network):
    cov = Covariates(np.random.default_rng(1).normal(size=(20, 4)))
    approx, reconstruction = svd_yz(network, cov, 2)
    assert reconstruction.shape == (20, 20)
    assert approx.v.shape == (24, 2)


def test_scaled_covariates_uses_global_max():
    cov = Covariates(np.array([[2.0, -4.0, 1.0], [1.0, 0.0, 0.5]]))
    np.testing.assert_allclose(scaled_covariates(cov), cov.z / 4.0)
    np.testing.assert_allclose(scaled_covariates(cov, [0, 2]), [[1.0, 0.5], [0.5, 0.25]])
    assert np.all(scaled_covariates(Covariates(np.zeros((2, 2)))) == 0)


def test_oracle_with_empty_support_falls_back_to_svd_y(network):
    logger = MagicMock()
    cov = Covariates(np.ones((20, 3)))
    _, reconstruction = svd_yz(network, cov, 2, oracle_support=[], logger=logger)
    np.testing.assert_allclose(reconstruction, svd_y(network, 2)[1])
    logger.warning.assert_called_once()


def test_svd_yz_rejects_row_mismatch(network):
    with pytest.raises(DimensionMismatchError):
        svd_yz(network, Covariates(np.zeros((5, 2))), 2)
