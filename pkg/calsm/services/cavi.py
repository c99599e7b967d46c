import logging
import time
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import scipy.linalg
from scipy.special import gammaln, log_expit

from calsm.formats.cavi import CaviState, FitOptions, FitReport, GaussianBlock, InverseGammaBlock
from calsm.formats.covariates import Covariates
from calsm.formats.model import ModelConfig
from calsm.formats.network import Network
from calsm.helpers.linalg import spectral_embedding
from calsm.helpers.logistic import jj_coefficient, logistic
from calsm.utilities.errors import DimensionMismatchError, NumericalError

INITIAL_VARIANCE = 0.1
NEGATIVE_TOLERANCE = 1e-10
LOG_2PI = float(np.log(2.0 * np.pi))
LOG_GAMMA_HALF = float(gammaln(0.5))

StepCallback = Callable[[str, CaviState], None]


def check_shapes(net: Network, cov: Covariates, cfg: ModelConfig) -> None:
    """
    Raises:
        DimensionMismatchError: If covariate rows disagree with the network size.
        ValueError: If the network has too few nodes for a d-dimensional embedding.
    """
    if cov.n != net.n:
        raise DimensionMismatchError("n", net.n, cov.n, "covariates")
    if net.n < cfg.d + 1:
        raise ValueError(f"Need at least d+1={cfg.d + 1} nodes for a {cfg.d}-dimensional fit, got n={net.n}.")


def _beta_prior(cfg: ModelConfig, n: int) -> Tuple[float, float]:
    resolved = cfg.resolve(n)
    return resolved.beta_prior_mean, resolved.prior_var


def _off_diagonal(matrix: np.ndarray) -> np.ndarray:
    masked = np.array(matrix, dtype=np.float64)
    np.fill_diagonal(masked, 0.0)
    return masked


def _jj_matrix(xi: np.ndarray) -> np.ndarray:
    return _off_diagonal(jj_coefficient(xi))


def expected_eta_sq(state: CaviState) -> np.ndarray:
    """E_q[(beta + x_i'x_j)^2] for every pair, with a zero diagonal."""
    mu, cov = state.x.mean, state.x.covariance
    n, d = mu.shape
    flat = cov.reshape(n, d * d)
    trace_term = flat @ flat.T
    quad = np.einsum("ia,jab,ib->ij", mu, cov, mu, optimize=True)
    inner = mu @ mu.T
    second = (
        trace_term
        + quad
        + quad.T
        + inner**2
        + 2.0 * state.beta_mean * inner
        + state.beta_mean**2
        + state.beta_var
    )
    np.fill_diagonal(second, 0.0)
    return second


def residual_sq_norms(state: CaviState, cov: Covariates) -> np.ndarray:
    """
    R_i = E||x_i - B'z_i||^2 under the variational blocks.

    Raises:
        NumericalError: If any R_i comes out below -1e-10.
    """
    mu = state.x.mean
    prior_mean = cov.z @ state.b.mean
    residuals = (
        state.x.traces()
        + np.sum(mu**2, axis=1)
        + (cov.z**2) @ state.b.traces()
        + np.sum(prior_mean**2, axis=1)
        - 2.0 * np.sum(prior_mean * mu, axis=1)
    )
    if residuals.size and np.min(residuals) < -NEGATIVE_TOLERANCE:
        raise NumericalError(f"Expected squared residual is negative: {np.min(residuals)}")
    return np.maximum(residuals, 0.0)


def init_state(
    net: Network,
    cov: Covariates,
    cfg: ModelConfig,
    seed: int,
    logger: Optional[logging.Logger] = None,
) -> CaviState:
    """
    Starting point for coordinate ascent.

    Latent means come from the spectral embedding of the network, coefficient means are
    zero, every covariance is 0.1 I, every inverse-gamma factor is IG(1, 1), and the
    intercept starts at N(0, sigma0^2). The tangent parameters get one update_xi pass.

    Args:
        net (Network): The observed network.
        cov (Covariates): Node covariates, possibly with p = 0 columns.
        cfg (ModelConfig): Model configuration resolved for this network.
        seed (int): Seed for the spectral initialisation.
        logger (Optional[logging.Logger]): Receives warnings from the embedding.

    Returns:
        CaviState: The initial variational state.

    Raises:
        ValueError: If the network, covariates and configuration disagree on sizes.
    """
    check_shapes(net, cov, cfg)
    rng = np.random.default_rng(seed)
    n, p, d = net.n, cov.p, cfg.d
    _, prior_var = _beta_prior(cfg, n)

    x_mean = spectral_embedding(net.adjacency, d, rng, logger)
    state = CaviState(
        beta_mean=0.0,
        beta_var=prior_var,
        x=GaussianBlock.isotropic(x_mean, INITIAL_VARIANCE),
        b=GaussianBlock.isotropic(np.zeros((p, d)), INITIAL_VARIANCE),
        lambda_x=InverseGammaBlock.constant(n),
        v_x_local=InverseGammaBlock.constant(n),
        tau_x=InverseGammaBlock.constant(None),
        v_x_global=InverseGammaBlock.constant(None),
        lambda_b=InverseGammaBlock.constant(p),
        v_b_local=InverseGammaBlock.constant(p),
        tau_b=InverseGammaBlock.constant(None),
        v_b_global=InverseGammaBlock.constant(None),
        xi=np.zeros((n, n)),
    )
    state.xi = update_xi(state, net, cfg)
    return state


def update_xi(state: CaviState, net: Network, cfg: ModelConfig) -> np.ndarray:
    """
    Tangent parameters xi_ij = sqrt(E[eta_ij^2]).

    Raises:
        NumericalError: If a second moment comes out below -1e-10.
    """
    second = expected_eta_sq(state)
    if np.min(second) < -NEGATIVE_TOLERANCE:
        raise NumericalError(f"Second moment of the linear predictor is negative: {np.min(second)}")
    return np.sqrt(np.maximum(second, 0.0))


def update_beta(state: CaviState, net: Network, cfg: ModelConfig) -> Tuple[float, float]:
    """Gaussian update of the intercept; returns (mean, variance)."""
    prior_mean, prior_var = _beta_prior(cfg, net.n)
    a = _jj_matrix(state.xi)
    inner = state.x.mean @ state.x.mean.T
    # Full off-diagonal sums count every unordered pair twice.
    pair_a = 0.5 * np.sum(a)
    pair_data = 0.5 * np.sum(_off_diagonal(net.adjacency - 0.5 - 2.0 * a * inner))

    variance = 1.0 / (1.0 / prior_var + 2.0 * cfg.alpha * pair_a)
    mean = variance * (cfg.alpha * pair_data + prior_mean / prior_var)
    return float(mean), float(variance)


def update_x(state: CaviState, net: Network, cov: Covariates, cfg: ModelConfig) -> GaussianBlock:
    """
    Gaussian update of every latent position, swept in node order with the freshest
    neighbour moments.

    Raises:
        NumericalError: If a posterior precision is not positive definite.
    """
    n, d = state.n, state.d
    a = _jj_matrix(state.xi)
    coefficients = _off_diagonal(net.adjacency - 0.5 - 2.0 * a * state.beta_mean)
    mean = state.x.mean.copy()
    covariance = state.x.covariance.copy()
    second = state.x.second_moments()
    prior_mean = cov.z @ state.b.mean
    weights = state.node_precision_weights()
    eye = np.eye(d)

    for i in range(n):
        precision = 2.0 * cfg.alpha * np.einsum("j,jab->ab", a[i], second) + weights[i] * eye
        linear = cfg.alpha * coefficients[i] @ mean + weights[i] * prior_mean[i]
        try:
            factor = scipy.linalg.cho_factor(precision)
        except np.linalg.LinAlgError as e:
            raise NumericalError(f"Precision of node {i} is not positive definite: {e}")
        node_cov = scipy.linalg.cho_solve(factor, eye)
        node_cov = 0.5 * (node_cov + node_cov.T)
        mean[i] = node_cov @ linear
        covariance[i] = node_cov
        second[i] = node_cov + np.outer(mean[i], mean[i])
    return GaussianBlock(mean=mean, covariance=covariance)


def update_scales_x(
    state: CaviState, cov: Covariates, cfg: ModelConfig
) -> Tuple[InverseGammaBlock, InverseGammaBlock, InverseGammaBlock, InverseGammaBlock]:
    """
    Inverse-gamma updates of the node-side horseshoe scales, in the order local scale,
    local auxiliary, global scale, global auxiliary. Returns (lambda_x, v_x_local, tau_x, v_x_global).
    """
    n, d = state.n, state.d
    residuals = residual_sq_norms(state, cov)

    lambda_x = InverseGammaBlock(
        shape=np.full(n, (d + 1) / 2.0),
        rate=0.5 * state.tau_x.mean_reciprocal() * residuals + state.v_x_local.mean_reciprocal(),
    )
    v_x_local = InverseGammaBlock(shape=np.ones(n), rate=1.0 + lambda_x.mean_reciprocal())
    tau_x = InverseGammaBlock(
        shape=np.asarray((n * d + 1) / 2.0),
        rate=np.asarray(
            np.sum(0.5 * lambda_x.mean_reciprocal() * residuals) + state.v_x_global.mean_reciprocal()
        ),
    )
    v_x_global = InverseGammaBlock(shape=np.asarray(1.0), rate=np.asarray(1.0 + tau_x.mean_reciprocal()))
    return lambda_x, v_x_local, tau_x, v_x_global


def update_b(state: CaviState, cov: Covariates, cfg: ModelConfig) -> GaussianBlock:
    """
    Gaussian update of the covariate coefficient rows, swept in covariate order.

    Each row is a weighted ridge regression of the partial residual
    mu_x_i - sum_{l != k} z_il mu_b_l on z_ik.
    """
    p, d = state.p, state.d
    if p == 0:
        return GaussianBlock(mean=state.b.mean.copy(), covariance=state.b.covariance.copy())

    z = cov.z
    weights = state.node_precision_weights()
    prior_precision = state.coefficient_precision_weights()
    mean = state.b.mean.copy()
    variances = np.empty(p)
    residual = state.x.mean - z @ mean
    column_weight = (weights[:, None] * z**2).sum(axis=0)

    for k in range(p):
        partial = residual + np.outer(z[:, k], mean[k])
        variances[k] = 1.0 / (column_weight[k] + prior_precision[k])
        mean[k] = variances[k] * ((weights * z[:, k]) @ partial)
        residual = partial - np.outer(z[:, k], mean[k])
    covariance = variances[:, None, None] * np.eye(d)[None, :, :]
    return GaussianBlock(mean=mean, covariance=covariance)


def update_scales_b(
    state: CaviState, cfg: ModelConfig
) -> Tuple[InverseGammaBlock, InverseGammaBlock, InverseGammaBlock, InverseGammaBlock]:
    """Covariate-side analogue of update_scales_x. Returns (lambda_b, v_b_local, tau_b, v_b_global)."""
    p, d = state.p, state.d
    if p == 0:
        return state.lambda_b, state.v_b_local, state.tau_b, state.v_b_global

    norms = state.b.expected_sq_norms()
    lambda_b = InverseGammaBlock(
        shape=np.full(p, (d + 1) / 2.0),
        rate=0.5 * state.tau_b.mean_reciprocal() * norms + state.v_b_local.mean_reciprocal(),
    )
    v_b_local = InverseGammaBlock(shape=np.ones(p), rate=1.0 + lambda_b.mean_reciprocal())
    tau_b = InverseGammaBlock(
        shape=np.asarray((p * d + 1) / 2.0),
        rate=np.asarray(np.sum(0.5 * lambda_b.mean_reciprocal() * norms) + state.v_b_global.mean_reciprocal()),
    )
    v_b_global = InverseGammaBlock(shape=np.asarray(1.0), rate=np.asarray(1.0 + tau_b.mean_reciprocal()))
    return lambda_b, v_b_local, tau_b, v_b_global


def _half_cauchy_terms(scale: InverseGammaBlock, auxiliary: InverseGammaBlock) -> float:
    """
    E_q[log p(scale | aux) + log p(aux)] + H[q(scale)] + H[q(aux)] for the augmentation
    scale ~ IG(1/2, 1/aux), aux ~ IG(1/2, 1).
    """
    scale_prior = (
        -0.5 * auxiliary.mean_log()
        - LOG_GAMMA_HALF
        - 1.5 * scale.mean_log()
        - auxiliary.mean_reciprocal() * scale.mean_reciprocal()
    )
    auxiliary_prior = -LOG_GAMMA_HALF - 1.5 * auxiliary.mean_log() - auxiliary.mean_reciprocal()
    return float(np.sum(scale_prior) + np.sum(auxiliary_prior) + scale.entropy() + auxiliary.entropy())


def _gaussian_prior(block: GaussianBlock, scale: InverseGammaBlock, shared: InverseGammaBlock, sq_norms: np.ndarray) -> float:
    d = block.mean.shape[1]
    precision = scale.mean_reciprocal() * shared.mean_reciprocal()
    terms = -0.5 * d * LOG_2PI - 0.5 * d * (scale.mean_log() + shared.mean_log()) - 0.5 * precision * sq_norms
    return float(np.sum(terms))


def compute_elbo(state: CaviState, net: Network, cov: Covariates, cfg: ModelConfig) -> float:
    """
    Evidence lower bound with the tangent-bound likelihood at the current xi.

    All expectations are closed form: Gaussian moments for beta, X and B and
    E[1/s] = a/b, E[log s] = log b - digamma(a) for the inverse-gamma scales.

    Returns:
        float: The bound at the current state.
    """
    prior_mean, prior_var = _beta_prior(cfg, net.n)
    xi = state.xi
    a = _jj_matrix(xi)
    mean_eta = state.beta_mean + state.x.mean @ state.x.mean.T
    second = expected_eta_sq(state)
    pair_terms = (net.adjacency - 0.5) * mean_eta + log_expit(xi) - xi / 2.0 - a * (second - xi**2)
    likelihood = cfg.alpha * float(np.sum(np.triu(pair_terms, k=1)))

    beta_prior = -0.5 * np.log(2.0 * np.pi * prior_var) - (
        (state.beta_mean - prior_mean) ** 2 + state.beta_var
    ) / (2.0 * prior_var)
    beta_entropy = 0.5 * np.log(2.0 * np.pi * np.e * state.beta_var)

    elbo = likelihood + float(beta_prior + beta_entropy)
    elbo += _gaussian_prior(state.x, state.lambda_x, state.tau_x, residual_sq_norms(state, cov))
    elbo += state.x.entropy()
    elbo += _half_cauchy_terms(state.lambda_x, state.v_x_local)
    elbo += _half_cauchy_terms(state.tau_x, state.v_x_global)

    if state.p > 0:
        elbo += _gaussian_prior(state.b, state.lambda_b, state.tau_b, state.b.expected_sq_norms())
        elbo += state.b.entropy()
        elbo += _half_cauchy_terms(state.lambda_b, state.v_b_local)
        elbo += _half_cauchy_terms(state.tau_b, state.v_b_global)
    return float(elbo)


def predict_probabilities(state: CaviState, cfg: Optional[ModelConfig] = None) -> np.ndarray:
    """
    Plug-in link probabilities logistic(mu_beta + mu_x_i'mu_x_j).

    The diagonal is filled by the same formula but self-loops are not modelled, so it
    carries no meaning.
    """
    return logistic(state.beta_mean + state.x.mean @ state.x.mean.T)


def latent_means(state: CaviState) -> np.ndarray:
    return state.x.mean.copy()


def expected_scales(state: CaviState) -> Dict[str, np.ndarray]:
    """Posterior means of the squared scales and of their reciprocals."""
    return {
        "lambda_x_sq": state.lambda_x.mean(),
        "tau_x_sq": state.tau_x.mean(),
        "lambda_b_sq": state.lambda_b.mean(),
        "tau_b_sq": state.tau_b.mean(),
        "lambda_x_sq_inv": state.lambda_x.mean_reciprocal(),
        "tau_x_sq_inv": state.tau_x.mean_reciprocal(),
        "lambda_b_sq_inv": state.lambda_b.mean_reciprocal(),
        "tau_b_sq_inv": state.tau_b.mean_reciprocal(),
    }


def node_mismatch_scores(state: CaviState) -> np.ndarray:
    """Effective prior variance 1/w_i of each latent position; large for mismatched nodes."""
    return 1.0 / state.node_precision_weights()


def covariate_importance(state: CaviState) -> np.ndarray:
    """E||b_k||^2 per covariate."""
    return state.b.expected_sq_norms()


def covariate_share(state: CaviState, cov: Covariates) -> float:
    """
    Fraction of the fitted latent positions carried by the covariates,
    ||Z mu_B||_F^2 / ||mu_X||_F^2.

    Near 1 when the latent positions sit on Z B and near 0 when the coefficients have been
    shrunk away. Returns 0.0 without covariates or when every latent mean is zero.
    """
    total = float(np.sum(state.x.mean**2))
    if state.p == 0 or total == 0.0:
        return 0.0
    return float(np.sum((cov.z @ state.b.mean) ** 2)) / total


class CaviService:
    """
    Service class running closed-form coordinate-ascent variational inference.

    One cycle applies update_xi, update_beta, update_x, update_scales_x, update_b and
    update_scales_b in that order. Fitting stops after max_cycles or when the mean
    absolute change of the fitted upper-triangle probabilities drops below prob_tolerance.
    """

    STEPS = ("update_xi", "update_beta", "update_x", "update_scales_x", "update_b", "update_scales_b")

    def __init__(self, logger: Optional[logging.Logger] = None) -> None:
        self.logger = logger if logger is not None else logging.getLogger("calsm_logger")

    def run_cycle(
        self,
        state: CaviState,
        net: Network,
        cov: Covariates,
        cfg: ModelConfig,
        on_step: Optional[StepCallback] = None,
    ) -> None:
        """Apply one full cycle in place. `on_step` is called after every individual update."""

        def notify(step: str) -> None:
            if on_step is not None:
                on_step(step, state)

        state.xi = update_xi(state, net, cfg)
        notify("update_xi")
        state.beta_mean, state.beta_var = update_beta(state, net, cfg)
        notify("update_beta")
        state.x = update_x(state, net, cov, cfg)
        notify("update_x")
        state.lambda_x, state.v_x_local, state.tau_x, state.v_x_global = update_scales_x(state, cov, cfg)
        notify("update_scales_x")
        state.b = update_b(state, cov, cfg)
        notify("update_b")
        state.lambda_b, state.v_b_local, state.tau_b, state.v_b_global = update_scales_b(state, cfg)
        notify("update_scales_b")

    def fit_cavi(
        self,
        net: Network,
        cov: Covariates,
        cfg: ModelConfig,
        opts: FitOptions,
        seed: int,
    ) -> Tuple[CaviState, FitReport]:
        """
        Fit the model by coordinate ascent.

        Args:
            net (Network): The observed network.
            cov (Covariates): Node covariates.
            cfg (ModelConfig): Model configuration; prior defaults are resolved against net.n.
            opts (FitOptions): Cycle limit, tolerance and ELBO tracking.
            seed (int): Seed for the initial state.

        Returns:
            Tuple[CaviState, FitReport]: The fitted state and a report with the cycles run,
            final ELBO, convergence flag and wall time.
        """
        started = time.perf_counter()
        cfg = cfg.resolve(net.n)
        state = init_state(net, cov, cfg, seed, self.logger)
        rows, cols = np.triu_indices(net.n, k=1)
        probabilities = predict_probabilities(state, cfg)[rows, cols]
        self.logger.info(f"CAVI fit started: n={net.n}, p={cov.p}, d={cfg.d}, max_cycles={opts.max_cycles}")

        converged = False
        cycle = 0
        for cycle in range(1, opts.max_cycles + 1):
            self.run_cycle(state, net, cov, cfg)
            state.cycle_count = cycle
            updated = predict_probabilities(state, cfg)[rows, cols]
            change = float(np.mean(np.abs(updated - probabilities))) if updated.size else 0.0
            probabilities = updated
            if opts.track_elbo:
                state.elbo_trace.append(compute_elbo(state, net, cov, cfg))
                self.logger.debug(f"CAVI cycle {cycle}: elbo={state.elbo_trace[-1]:.6f} change={change:.3e}")
            else:
                self.logger.debug(f"CAVI cycle {cycle}: change={change:.3e}")
            if change < opts.prob_tolerance:
                converged = True
                break

        final_elbo = state.elbo_trace[-1] if state.elbo_trace else compute_elbo(state, net, cov, cfg)
        report = FitReport(
            engine="cavi",
            iterations=cycle,
            final_elbo=final_elbo,
            converged=converged,
            elbo_trace=list(state.elbo_trace),
            wall_time=time.perf_counter() - started,
        )
        self.logger.info(f"CAVI fit finished after {cycle} cycles (converged={converged}, elbo={final_elbo:.4f})")
        return state, report


def lsm_mode(
    net: Network,
    cfg: ModelConfig,
    opts: FitOptions,
    seed: int,
    logger: Optional[logging.Logger] = None,
) -> Tuple[np.ndarray, np.ndarray, CaviState, FitReport]:
    """
    Covariate-free latent space fit: fit_cavi with an n x 0 covariate matrix, so the
    latent prior is centred at zero and the coefficient side is skipped.

    Returns:
        Tuple of (probabilities, latent means, state, report).
    """
    state, report = CaviService(logger).fit_cavi(net, Covariates.empty(net.n), cfg, opts, seed)
    return predict_probabilities(state, cfg), latent_means(state), state, report
