import hashlib
import itertools
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from calsm.formats.covariates import Covariates
from calsm.formats.network import Network
from calsm.formats.simulation import ScenarioGrid, SimScenario, SimTruth
from calsm.helpers.logistic import logistic

_default_logger = logging.getLogger("calsm_logger")


def gen_covariates(scenario: SimScenario, rng: np.random.Generator) -> Covariates:
    """i.i.d. standard normal entries, or +-1 with probability 1/2 each for the binary kind."""
    shape = (scenario.n, scenario.p)
    if scenario.covariate_kind == "binary":
        return Covariates(rng.choice(np.array([-1.0, 1.0]), size=shape))
    return Covariates(rng.standard_normal(shape))


def gen_coefficients(scenario: SimScenario, rng: np.random.Generator) -> np.ndarray:
    """p x d matrix with s_b uniformly chosen rows filled from the scenario's value set."""
    b_star = np.zeros((scenario.p, scenario.d))
    if scenario.s_b == 0:
        return b_star
    rows = rng.choice(scenario.p, size=scenario.s_b, replace=False)
    b_star[rows] = rng.choice(np.asarray(scenario.value_set, dtype=np.float64), size=(scenario.s_b, scenario.d))
    return b_star


def gen_latents(
    scenario: SimScenario, z: Covariates, b_star: np.ndarray, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    """
    Latent positions X* = k * X~ / max|X~| with X~ = Z B* and its mismatched rows replaced.

    Returns:
        Tuple of (x_star, mismatched_rows, true_labels). true_labels, set only for the
        community variant, are 1-based ids of the distinct rows of Z B* before mismatching.

    Raises:
        ValueError: If X~ is identically zero and cannot be scaled.
    """
    x_tilde = z.z @ b_star
    true_labels = None
    if scenario.community_variant:
        _, inverse = np.unique(np.round(x_tilde, 12), axis=0, return_inverse=True)
        true_labels = np.asarray(inverse).reshape(-1) + 1

    count = scenario.resolved_mismatch_count()
    mismatched = np.sort(rng.choice(scenario.n, size=count, replace=False)) if count else np.zeros(0, dtype=np.int64)
    if count:
        if scenario.community_variant:
            x_tilde[mismatched] = x_tilde[rng.permutation(mismatched)]
        else:
            x_tilde[mismatched] = rng.uniform(-2.0, 2.0, size=(count, scenario.d))

    ceiling = np.max(np.abs(x_tilde)) if x_tilde.size else 0.0
    if ceiling == 0.0:
        raise ValueError("Latent matrix is identically zero and cannot be scaled to the signal strength.")
    return x_tilde / ceiling * scenario.k, mismatched, true_labels


def gen_network(x_star: np.ndarray, beta_star: float, rng: np.random.Generator) -> Network:
    """Independent Bernoulli(logistic(beta* + x_i'x_j)) draws for i<j, symmetrised, zero diagonal."""
    n = x_star.shape[0]
    probabilities = logistic(beta_star + x_star @ x_star.T)
    upper = np.triu(rng.random((n, n)) < probabilities, k=1)
    return Network((upper | upper.T).astype(np.int8))


def generate(scenario: SimScenario) -> SimTruth:
    """
    Build one SimTruth from its scenario; the scenario seed fixes every draw.

    Args:
        scenario (SimScenario): Sizes, case, signal strength and seed of the experiment.

    Returns:
        SimTruth: Covariates, true coefficients and latents, the sampled network and the
        mismatched row indices (plus true labels for the community variant).
    """
    rng = np.random.default_rng(scenario.seed)
    z = gen_covariates(scenario, rng)
    b_star = gen_coefficients(scenario, rng)
    x_star, mismatched, labels = gen_latents(scenario, z, b_star, rng)
    network = gen_network(x_star, scenario.beta_star, rng)
    return SimTruth(
        scenario=scenario,
        z=z,
        b_star=b_star,
        x_star=x_star,
        network=network,
        mismatched_rows=mismatched,
        true_labels=labels,
    )


def derive_seed(master_seed: int, coordinates: Dict[str, Any], replicate: int) -> int:
    """Stable 63-bit seed from the master seed, the cell coordinates and the replicate index."""
    payload = json.dumps(
        {"master": master_seed, "cell": coordinates, "replicate": replicate}, sort_keys=True, default=str
    )
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & (2**63 - 1)


def expand_grid(grid: ScenarioGrid) -> List[Tuple[int, int, SimScenario]]:
    """Every (cell index, replicate, scenario) of the grid, each with its own derived seed."""
    names = sorted(grid.axes)
    cells = list(itertools.product(*(grid.axes[name] for name in names))) if names else [()]
    expanded = []
    for cell_index, values in enumerate(cells):
        coordinates = dict(zip(names, values))
        cell = replace(grid.base, **coordinates) if coordinates else grid.base
        for replicate in range(grid.replicates):
            seed = derive_seed(grid.master_seed, coordinates, replicate)
            expanded.append((cell_index, replicate, cell.with_seed(seed)))
    return expanded


def run_scenario_grid(
    grid: ScenarioGrid, workers: int = 1, logger: Optional[logging.Logger] = None
) -> List[Tuple[int, int, SimTruth]]:
    """
    Generate every scenario of the grid. Cells are independent, so they may be produced by
    a thread pool; the result order and content do not depend on `workers`.

    Args:
        grid (ScenarioGrid): Base scenario, axes to cross, replicate count and master seed.
        workers (int): Thread pool size; 1 generates serially.
        logger (Optional[logging.Logger]): Defaults to the package logger.

    Returns:
        List[Tuple[int, int, SimTruth]]: (cell index, replicate, truth) in grid order.
    """
    logger = logger if logger is not None else _default_logger
    expanded = expand_grid(grid)
    logger.info(f"Generating {len(expanded)} scenarios with {workers} worker(s).")
    scenarios = [scenario for _, _, scenario in expanded]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            truths = list(pool.map(generate, scenarios))
    else:
        truths = [generate(scenario) for scenario in scenarios]
    return [(cell, replicate, truth) for (cell, replicate, _), truth in zip(expanded, truths)]
