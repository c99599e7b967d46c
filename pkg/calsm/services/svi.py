import copy
import logging
import math
import time
from typing import Dict, List, Optional, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from torch.distributions import Gamma, HalfCauchy, Normal

from calsm.formats.cavi import FitReport
from calsm.formats.covariates import Covariates
from calsm.formats.model import ModelConfig
from calsm.formats.network import Network
from calsm.formats.svi import SviConfig, SviState
from calsm.helpers.linalg import spectral_embedding
from calsm.helpers.logistic import logistic
from calsm.services.cavi import check_shapes
from calsm.utilities.errors import NumericalError

SCALE_FLOOR = 1e-8
LOG_2PI = math.log(2.0 * math.pi)

_default_logger = logging.getLogger("calsm_logger")


def sample_minibatch(net: Network, batch_size: int, rng: np.random.Generator) -> np.ndarray:
    """
    Uniform sample without replacement of min(batch_size, |E+|) positive edges, returned
    in edge-list order.

    Raises:
        ValueError: If the network has no positive edges.
    """
    if net.num_edges == 0:
        raise ValueError("Cannot sample a minibatch from a network without positive edges.")
    size = min(batch_size, net.num_edges)
    chosen = np.sort(rng.choice(net.num_edges, size=size, replace=False))
    return net.positive_edges[chosen]


def _redraw_until_valid(net: Network, anchors: np.ndarray, partners: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    invalid = (partners == anchors) | (net.adjacency[anchors, partners] == 1)
    while np.any(invalid):
        partners[invalid] = rng.integers(0, net.n, size=int(invalid.sum()))
        invalid = (partners == anchors) | (net.adjacency[anchors, partners] == 1)
    return partners


def sample_negatives(
    net: Network,
    positives: np.ndarray,
    ratio: int,
    rng: np.random.Generator,
    scheme: str = "row",
    logger: Optional[logging.Logger] = None,
) -> np.ndarray:
    """
    Draw non-edges for a minibatch of positive edges by rejection sampling.

    "row": for every (i, j) in the minibatch, `ratio` partners j' != i with Y_ij' = 0.
    Rows with no non-neighbour are skipped with a warning.
    "uniform": ratio * len(positives) unordered non-edges drawn uniformly.
    Duplicates are allowed under both schemes.
    """
    logger = logger if logger is not None else _default_logger
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, 2)
    empty = np.zeros((0, 2), dtype=np.int64)

    if scheme == "row":
        anchors = positives[:, 0]
        saturated = net.adjacency[anchors].sum(axis=1) >= net.n - 1
        if np.any(saturated):
            logger.warning(
                f"Skipping negatives for rows without non-neighbours: {sorted(set(anchors[saturated].tolist()))}"
            )
        anchors = np.repeat(anchors[~saturated], ratio)
        if anchors.size == 0:
            return empty
        partners = _redraw_until_valid(net, anchors, rng.integers(0, net.n, size=anchors.size), rng)
        return np.stack([anchors, partners], axis=1)

    if scheme == "uniform":
        total = positives.shape[0] * ratio
        if net.num_non_edges == 0:
            logger.warning("Network is complete; no non-edges to sample.")
            return empty
        if total == 0:
            return empty
        anchors = rng.integers(0, net.n, size=total)
        partners = rng.integers(0, net.n, size=total)
        # Both endpoints are redrawn so every non-edge keeps the same probability.
        invalid = (anchors == partners) | (net.adjacency[anchors, partners] == 1)
        while np.any(invalid):
            count = int(invalid.sum())
            anchors[invalid] = rng.integers(0, net.n, size=count)
            partners[invalid] = rng.integers(0, net.n, size=count)
            invalid = (anchors == partners) | (net.adjacency[anchors, partners] == 1)
        return np.stack([anchors, partners], axis=1)

    raise ValueError(f"Unknown negative sampling scheme: {scheme}")


def _pair_eta(x: torch.Tensor, beta: torch.Tensor, pairs: np.ndarray) -> torch.Tensor:
    rows = torch.as_tensor(pairs[:, 0], dtype=torch.long)
    cols = torch.as_tensor(pairs[:, 1], dtype=torch.long)
    return beta.unsqueeze(-1) + (x[..., rows, :] * x[..., cols, :]).sum(-1)


def weighted_loglik(
    net: Network,
    x_sample: torch.Tensor,
    beta_sample: torch.Tensor,
    positives: np.ndarray,
    negatives: np.ndarray,
) -> torch.Tensor:
    """
    Weighted minibatch estimate of the Bernoulli log-likelihood:
    |E+|/|E+~| sum log s(eta) over sampled edges + |E-|/|E-~| sum log(1-s(eta)) over
    sampled non-edges. x_sample may carry a leading sample dimension matching beta_sample.

    When no non-edges were sampled the negative term is computed exactly over all non-edges.

    Raises:
        ValueError: If the positive minibatch is empty.
    """
    x = torch.as_tensor(x_sample, dtype=torch.float64)
    beta = torch.as_tensor(beta_sample, dtype=torch.float64)
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, 2)
    negatives = np.asarray(negatives, dtype=np.int64).reshape(-1, 2)
    if positives.shape[0] == 0:
        raise ValueError("weighted_loglik needs at least one sampled positive edge.")

    positive_weight = net.num_edges / positives.shape[0]
    estimate = positive_weight * F.logsigmoid(_pair_eta(x, beta, positives)).sum(-1)

    if negatives.shape[0] > 0:
        negative_weight = net.num_non_edges / negatives.shape[0]
        estimate = estimate + negative_weight * F.logsigmoid(-_pair_eta(x, beta, negatives)).sum(-1)
    elif net.num_non_edges > 0:
        rows, cols = np.nonzero(np.triu(1 - net.adjacency, k=1))
        exact = np.stack([rows, cols], axis=1)
        estimate = estimate + F.logsigmoid(-_pair_eta(x, beta, exact)).sum(-1)
    return estimate


def _elbo_from_draws(
    state: SviState,
    net: Network,
    z: torch.Tensor,
    cfg: ModelConfig,
    samples: int,
    positives: np.ndarray,
    negatives: np.ndarray,
) -> torch.Tensor:
    n, p, d = state.n, state.p, state.d
    resolved = cfg.resolve(net.n)
    prior_mean, prior_var = resolved.beta_prior_mean, resolved.prior_var
    half_cauchy = HalfCauchy(torch.tensor(1.0, dtype=torch.float64))

    beta_std = state.beta_log_std.exp()
    x_std = state.x_log_std.exp()
    b_std = state.b_log_std.exp()
    beta = state.beta_mean + beta_std * torch.randn(samples, dtype=torch.float64)
    x = state.x_mean + x_std[:, None] * torch.randn(samples, n, d, dtype=torch.float64)
    b = state.b_mean + b_std[:, None] * torch.randn(samples, p, d, dtype=torch.float64)

    q_lambda_x = Gamma(state.lambda_x_log_shape.exp(), state.lambda_x_log_rate.exp())
    q_tau_x = Gamma(state.tau_x_log_shape.exp(), state.tau_x_log_rate.exp())
    lambda_x = q_lambda_x.rsample((samples,)).clamp_min(SCALE_FLOOR)
    tau_x = q_tau_x.rsample((samples,)).clamp_min(SCALE_FLOOR)

    loglik = weighted_loglik(net, x, beta, positives, negatives)
    log_prior = Normal(
        torch.tensor(prior_mean, dtype=torch.float64), torch.tensor(math.sqrt(prior_var), dtype=torch.float64)
    ).log_prob(beta)

    # Gaussian prior on X integrated over q(X) given the sampled B and scales.
    x_var = (lambda_x * tau_x[:, None]) ** 2
    x_residual = ((state.x_mean - torch.matmul(z, b)) ** 2).sum(-1) + d * x_std**2
    log_prior = log_prior + (-0.5 * d * (LOG_2PI + x_var.log()) - 0.5 * x_residual / x_var).sum(-1)
    log_prior = log_prior + half_cauchy.log_prob(lambda_x).sum(-1) + half_cauchy.log_prob(tau_x)
    entropy = Normal(state.beta_mean, beta_std).entropy() + d * Normal(torch.zeros_like(x_std), x_std).entropy().sum()
    entropy = entropy + q_lambda_x.entropy().sum() + q_tau_x.entropy()

    if p > 0:
        q_lambda_b = Gamma(state.lambda_b_log_shape.exp(), state.lambda_b_log_rate.exp())
        q_tau_b = Gamma(state.tau_b_log_shape.exp(), state.tau_b_log_rate.exp())
        lambda_b = q_lambda_b.rsample((samples,)).clamp_min(SCALE_FLOOR)
        tau_b = q_tau_b.rsample((samples,)).clamp_min(SCALE_FLOOR)
        b_var = (lambda_b * tau_b[:, None]) ** 2
        b_norms = (state.b_mean**2).sum(-1) + d * b_std**2
        log_prior = log_prior + (-0.5 * d * (LOG_2PI + b_var.log()) - 0.5 * b_norms / b_var).sum(-1)
        log_prior = log_prior + half_cauchy.log_prob(lambda_b).sum(-1) + half_cauchy.log_prob(tau_b)
        entropy = entropy + d * Normal(torch.zeros_like(b_std), b_std).entropy().sum()
        entropy = entropy + q_lambda_b.entropy().sum() + q_tau_b.entropy()

    return (cfg.alpha * loglik + log_prior).mean() + entropy


def elbo_estimate(
    state: SviState,
    net: Network,
    cov: Covariates,
    cfg: ModelConfig,
    svicfg: SviConfig,
    rng: np.random.Generator,
    positives: Optional[np.ndarray] = None,
    negatives: Optional[np.ndarray] = None,
    logger: Optional[logging.Logger] = None,
) -> torch.Tensor:
    """
    Monte-Carlo ELBO estimate over svicfg.mc_samples joint draws, differentiable in the
    state's parameters.

    Gaussian draws are reparameterised and Gamma draws use pathwise rsample. All torch
    randomness is seeded from `rng` inside a forked RNG scope, so the estimate is a
    deterministic function of (state, rng) and leaves the global torch RNG untouched.

    Raises:
        NumericalError: If two consecutive draws give a non-finite estimate.
    """
    if positives is None:
        positives = sample_minibatch(net, svicfg.batch_size, rng)
    if negatives is None:
        negatives = sample_negatives(
            net, positives, svicfg.negatives_per_positive, rng, scheme=svicfg.negative_scheme, logger=logger
        )
    z = torch.as_tensor(cov.z, dtype=torch.float64)
    seed = int(rng.integers(0, 2**62))

    for attempt in range(2):
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed + attempt)
            estimate = _elbo_from_draws(state, net, z, cfg, svicfg.mc_samples, positives, negatives)
        if torch.isfinite(estimate):
            return estimate
    raise NumericalError("ELBO estimate is not finite after resampling.")


def predict_probabilities(state: SviState) -> np.ndarray:
    """Plug-in link probabilities at the variational means; the diagonal carries no meaning."""
    x = state.latent_means()
    return logistic(state.intercept() + x @ x.T)


class SviService:
    """
    Service class running stochastic variational inference with edge subsampling.

    An epoch is ceil(|E+| / batch_size) optimizer steps. Progress is tracked on an
    exponentially smoothed per-epoch ELBO; the learning rate is halved on plateaus,
    training stops early after `early_stop_patience` epochs without improvement, and the
    returned state holds the parameters of the best smoothed ELBO.
    """

    def __init__(self, logger: Optional[logging.Logger] = None) -> None:
        self.logger = logger if logger is not None else _default_logger

    def init_state(self, net: Network, cov: Covariates, cfg: ModelConfig, svicfg: SviConfig) -> SviState:
        rng = np.random.default_rng(svicfg.seed)
        x_mean = spectral_embedding(net.adjacency, cfg.d, rng, self.logger)
        density = min(max(net.num_edges / max(net.num_pairs, 1), 1e-6), 1 - 1e-6)
        return SviState(
            x_mean=x_mean,
            p=cov.p,
            beta_mean=math.log(density / (1 - density)),
            gamma_init=svicfg.gamma_init,
        )

    def fit_svi(
        self,
        net: Network,
        cov: Covariates,
        cfg: ModelConfig,
        svicfg: SviConfig,
    ) -> Tuple[SviState, FitReport]:
        """
        Maximise the ELBO estimate with AdamW, global gradient-norm clipping and
        plateau-based learning-rate decay.

        Args:
            net (Network): Observed network; needs at least one positive edge.
            cov (Covariates): Node covariates with one row per node (p may be 0).
            cfg (ModelConfig): Model settings; the intercept prior is resolved to n.
            svicfg (SviConfig): Optimiser, sampling and stopping settings, including the seed.

        Returns:
            Tuple[SviState, FitReport]: The best-ELBO state and a report with epochs run,
            optimizer steps, best smoothed ELBO and the final learning rate.

        Raises:
            DimensionMismatchError: If covariate rows disagree with the network size.
            ValueError: If the network has no positive edges.
        """
        started = time.perf_counter()
        check_shapes(net, cov, cfg)
        if net.num_edges == 0:
            self.logger.error(f"SVI needs at least one positive edge; the {net.n}-node network has none.")
            raise ValueError("Cannot fit SVI on a network without positive edges.")
        cfg = cfg.resolve(net.n)
        torch.manual_seed(svicfg.seed)
        state = self.init_state(net, cov, cfg, svicfg)
        rng = np.random.default_rng(svicfg.seed)

        optimizer = torch.optim.AdamW(state.parameters(), lr=svicfg.learning_rate, weight_decay=svicfg.weight_decay)
        scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
            optimizer, mode="max", factor=svicfg.lr_decay_factor, patience=svicfg.lr_decay_patience
        )
        steps_per_epoch = math.ceil(net.num_edges / svicfg.batch_size)
        self.logger.info(
            f"SVI fit started: n={net.n}, p={cov.p}, d={cfg.d}, |E+|={net.num_edges}, steps/epoch={steps_per_epoch}"
        )

        best_elbo = -math.inf
        best_state: Dict[str, torch.Tensor] = copy.deepcopy(state.state_dict())
        smoothed: Optional[float] = None
        stale_epochs = 0
        steps = 0
        epoch = 0
        trace: List[float] = []
        stopped_early = False

        for epoch in range(1, svicfg.max_epochs + 1):
            epoch_total = 0.0
            for _ in range(steps_per_epoch):
                optimizer.zero_grad()
                elbo = elbo_estimate(state, net, cov, cfg, svicfg, rng, logger=self.logger)
                (-elbo).backward()
                torch.nn.utils.clip_grad_norm_(state.parameters(), svicfg.grad_clip_norm)
                optimizer.step()
                epoch_total += float(elbo.detach())
                steps += 1

            epoch_elbo = epoch_total / max(steps_per_epoch, 1)
            if smoothed is None:
                smoothed = epoch_elbo
            else:
                smoothed = svicfg.smoothing * smoothed + (1.0 - svicfg.smoothing) * epoch_elbo
            trace.append(smoothed)
            scheduler.step(smoothed)

            if smoothed > best_elbo:
                best_elbo = smoothed
                best_state = copy.deepcopy(state.state_dict())
                stale_epochs = 0
            else:
                stale_epochs += 1
            self.logger.debug(
                f"SVI epoch {epoch}: smoothed_elbo={smoothed:.4f} lr={optimizer.param_groups[0]['lr']:.2e}"
            )
            if stale_epochs >= svicfg.early_stop_patience:
                stopped_early = True
                self.logger.info(f"SVI early stop at epoch {epoch}: no improvement for {stale_epochs} epochs.")
                break

        state.load_state_dict(best_state)
        report = FitReport(
            engine="svi",
            iterations=epoch,
            final_elbo=best_elbo,
            converged=stopped_early,
            elbo_trace=trace,
            steps=steps,
            final_learning_rate=float(optimizer.param_groups[0]["lr"]),
            wall_time=time.perf_counter() - started,
        )
        self.logger.info(f"SVI fit finished after {epoch} epochs and {steps} steps (best elbo={best_elbo:.4f})")
        return state, report
