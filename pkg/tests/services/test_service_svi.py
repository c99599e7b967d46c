from unittest.mock import MagicMock

import numpy as np
import pytest
import torch

from calsm.formats.covariates import Covariates
from calsm.formats.model import LatentParams, ModelConfig
from calsm.formats.network import Network
from calsm.formats.simulation import SimScenario
from calsm.formats.svi import SviConfig
from calsm.helpers.logistic import log_likelihood
from calsm.services.simulation import generate
from calsm.services.svi import (
    SviService,
    elbo_estimate,
    predict_probabilities,
    sample_minibatch,
    sample_negatives,
    weighted_loglik,
)


@pytest.fixture
def truth():
    return generate(SimScenario(case=1, n=40, p=6, seed=8))


def all_non_edges(net):
    rows, cols = np.nonzero(np.triu(1 - net.adjacency, k=1))
    return np.stack([rows, cols], axis=1)


def test_full_batch_estimate_is_exact(truth):
    net = truth.network
    x = np.random.default_rng(0).normal(scale=0.5, size=(net.n, 2))
    beta = -1.3
    estimate = weighted_loglik(net, torch.as_tensor(x), torch.tensor(beta), net.positive_edges, all_non_edges(net))
    exact = log_likelihood(net, LatentParams(beta=beta, x=x, b=np.zeros((0, 2))), ModelConfig(d=2))
    assert float(estimate) == pytest.approx(exact, abs=1e-12 * max(1.0, abs(exact)))


def test_missing_negatives_fall_back_to_exact_term(truth):
    net = truth.network
    x = torch.zeros((net.n, 2), dtype=torch.float64)
    with_all = weighted_loglik(net, x, torch.tensor(0.0), net.positive_edges, all_non_edges(net))
    without = weighted_loglik(net, x, torch.tensor(0.0), net.positive_edges, np.zeros((0, 2), dtype=np.int64))
    assert float(without) == pytest.approx(float(with_all), abs=1e-10)


def test_uniform_negatives_are_unbiased():
    net = generate(SimScenario(case=1, n=30, p=4, seed=12)).network
    rng = np.random.default_rng(1)
    x = rng.normal(scale=0.5, size=(net.n, 2))
    beta = -1.0
    exact = log_likelihood(net, LatentParams(beta=beta, x=x, b=np.zeros((0, 2))), ModelConfig(d=2))
    x_t, beta_t = torch.as_tensor(x), torch.tensor(beta)

    draws = []
    for _ in range(10_000):
        negatives = sample_negatives(net, net.positive_edges[:20], 5, rng, scheme="uniform")
        draws.append(float(weighted_loglik(net, x_t, beta_t, net.positive_edges, negatives)))
    standard_error = np.std(draws, ddof=1) / np.sqrt(len(draws))
    assert abs(np.mean(draws) - exact) < 3 * standard_error


@pytest.mark.parametrize("scheme", ["row", "uniform"])
def test_sampled_negatives_are_non_edges(truth, scheme):
    net = truth.network
    negatives = sample_negatives(net, net.positive_edges[:10], 3, np.random.default_rng(2), scheme=scheme)
    assert negatives.shape == (30, 2)
    assert np.all(negatives[:, 0] != negatives[:, 1])
    assert np.all(net.adjacency[negatives[:, 0], negatives[:, 1]] == 0)


def test_row_scheme_keeps_anchor_node(truth):
    positives = truth.network.positive_edges[:4]
    negatives = sample_negatives(truth.network, positives, 2, np.random.default_rng(3), scheme="row")
    np.testing.assert_array_equal(negatives[:, 0], np.repeat(positives[:, 0], 2))


def test_complete_network_warns_and_returns_no_negatives():
    net = Network(np.ones((4, 4), dtype=np.int8) - np.eye(4, dtype=np.int8))
    for scheme in ("row", "uniform"):
        logger = MagicMock()
        negatives = sample_negatives(net, net.positive_edges, 2, np.random.default_rng(0), scheme=scheme, logger=logger)
        assert negatives.shape == (0, 2)
        logger.warning.assert_called_once()


def test_unknown_scheme_raises(truth):
    with pytest.raises(ValueError):
        sample_negatives(truth.network, truth.network.positive_edges[:2], 1, np.random.default_rng(0), scheme="degree")


def test_minibatch_sampling(truth):
    batch = sample_minibatch(truth.network, 10, np.random.default_rng(0))
    assert batch.shape == (10, 2)
    assert len({tuple(edge) for edge in batch}) == 10
    whole = sample_minibatch(truth.network, 10**6, np.random.default_rng(0))
    np.testing.assert_array_equal(whole, truth.network.positive_edges)
    with pytest.raises(ValueError):
        sample_minibatch(Network(np.zeros((3, 3))), 5, np.random.default_rng(0))


def test_elbo_estimate_is_seeded_and_leaves_global_rng_alone(truth):
    service = SviService(logger=MagicMock())
    cfg = ModelConfig(d=2).resolve(truth.network.n)
    svicfg = SviConfig(batch_size=32, mc_samples=3)
    state = service.init_state(truth.network, truth.z, cfg, svicfg)

    torch.manual_seed(123)
    before = torch.get_rng_state()
    first = elbo_estimate(state, truth.network, truth.z, cfg, svicfg, np.random.default_rng(4))
    assert torch.equal(before, torch.get_rng_state())
    second = elbo_estimate(state, truth.network, truth.z, cfg, svicfg, np.random.default_rng(4))
    assert float(first) == float(second)
    assert torch.isfinite(first)


def test_fit_svi_smoke(truth):
    svicfg = SviConfig(batch_size=64, max_epochs=6, mc_samples=2, seed=5)
    service = SviService(logger=MagicMock())
    state, report = service.fit_svi(truth.network, truth.z, ModelConfig(d=2), svicfg)
    steps_per_epoch = int(np.ceil(truth.network.num_edges / 64))
    assert report.engine == "svi"
    assert report.iterations == 6
    assert report.steps == 6 * steps_per_epoch
    assert report.final_elbo == pytest.approx(max(report.elbo_trace))
    probabilities = predict_probabilities(state)
    assert probabilities.shape == (40, 40)
    assert np.all(np.isfinite(probabilities))
    assert state.coefficient_means().shape == (6, 2)


def test_fit_svi_is_reproducible(truth):
    svicfg = SviConfig(batch_size=64, max_epochs=3, mc_samples=2, seed=1)
    first, first_report = SviService(logger=MagicMock()).fit_svi(truth.network, truth.z, ModelConfig(d=2), svicfg)
    second, second_report = SviService(logger=MagicMock()).fit_svi(truth.network, truth.z, ModelConfig(d=2), svicfg)
    np.testing.assert_array_equal(first.latent_means(), second.latent_means())
    assert first_report == second_report


def test_fit_svi_without_covariates(truth):
    svicfg = SviConfig(batch_size=128, max_epochs=2, mc_samples=1)
    state, _ = SviService(logger=MagicMock()).fit_svi(truth.network, Covariates.empty(40), ModelConfig(d=2), svicfg)
    assert state.p == 0


def test_fit_svi_rejects_network_without_edges():
    logger = MagicMock()
    empty = Network(np.zeros((6, 6), dtype=np.int8))
    with pytest.raises(ValueError):
        SviService(logger=logger).fit_svi(empty, Covariates.empty(6), ModelConfig(d=2), SviConfig(max_epochs=3))
    logger.error.assert_called_once()


def test_minibatch_inclusion_frequency_matches_batch_share():
    net = Network.from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)])
    rng = np.random.default_rng(21)
    draws = 100_000
    counts = np.zeros(net.num_edges)
    index = {tuple(edge): k for k, edge in enumerate(net.positive_edges.tolist())}
    for _ in range(draws):
        for edge in sample_minibatch(net, 2, rng).tolist():
            counts[index[tuple(edge)]] += 1
    share = 2 / net.num_edges
    sigma = np.sqrt(share * (1 - share) / draws)
    assert np.all(np.abs(counts / draws - share) < 3 * sigma)


def test_elbo_estimate_variance_shrinks_with_sample_count(truth):
    net = truth.network
    cfg = ModelConfig(d=2).resolve(net.n)
    # Tight scale factors keep every Monte-Carlo term well within its light-tailed range.
    tight = SviConfig(batch_size=32, gamma_init=(50.0, 50.0, 50.0, 50.0))
    state = SviService(logger=MagicMock()).init_state(net, truth.z, cfg, tight)
    positives = net.positive_edges[:20]
    negatives = sample_negatives(net, positives, 5, np.random.default_rng(0))

    variances = {}
    for samples in (1, 10, 100):
        svicfg = SviConfig(batch_size=32, mc_samples=samples, gamma_init=tight.gamma_init)
        with torch.no_grad():
            estimates = [
                float(elbo_estimate(state, net, truth.z, cfg, svicfg, np.random.default_rng(seed), positives, negatives))
                for seed in range(400)
            ]
        variances[samples] = np.var(estimates, ddof=1)
    assert 5.0 < variances[1] / variances[10] < 20.0
    assert 5.0 < variances[10] / variances[100] < 20.0
