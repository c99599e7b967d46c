import argparse
import json
import logging
import os
from typing import Any, List, Optional, Sequence

import numpy as np
from dotenv import load_dotenv

from calsm.assistants.simulation import SimulationAssistant
from calsm.assistants.storage import StorageAssistant
from calsm.creator import ExperimentCreator, parse_experiment
from calsm.formats.experiment import BASELINES, ENGINES, NETWORK_FORMATS
from calsm.formats.simulation import ScenarioGrid
from calsm.services.clustering import cluster_latents
from calsm.services.metrics import rand_index, upper_triangle_pcc
from calsm.utilities.bundle import UtilitiesBundle
from calsm.utilities.errors import ConfigurationError

WORKERS_VARIABLE = "CALSM_WORKERS"
SCENARIO_FLAGS = (
    ("case", "case"),
    ("n", "n"),
    ("p", "p"),
    ("d", "d"),
    ("k", "k"),
    ("beta_star", "beta_star"),
    ("mismatch_ratio", "mismatch_ratio"),
)


def _comma_list(value: str) -> List[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON experiment config.")
    common.add_argument("--seed", type=int, default=None, help="Master seed.")
    common.add_argument("--out", default=None, help="Output directory.")
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="Override any config value, e.g. --set engine.svi.batch_size=256. Repeatable.",
    )

    experiment = argparse.ArgumentParser(add_help=False)
    experiment.add_argument("--case", type=int, choices=(1, 2, 3), default=None)
    experiment.add_argument("--n", type=int, default=None, help="Number of simulated nodes.")
    experiment.add_argument("--p", type=int, default=None, help="Number of simulated covariates.")
    experiment.add_argument("--d", type=int, default=None, help="Latent dimension.")
    experiment.add_argument("--k", type=float, default=None, help="Latent signal strength.")
    experiment.add_argument("--beta-star", type=float, default=None)
    experiment.add_argument("--mismatch-ratio", type=float, default=None)
    experiment.add_argument("--community", action="store_true", help="Use the binary-covariate community scenario.")
    experiment.add_argument("--replicates", type=int, default=None)
    experiment.add_argument("--metrics", type=_comma_list, default=None, help="Comma-separated: pcc,pcc_diff,ri,ri_diff.")
    experiment.add_argument("--baselines", type=_comma_list, default=None, help=f"Comma-separated from {BASELINES}.")
    experiment.add_argument("--clusters", type=int, default=None, help="Number of communities for k-means.")
    experiment.add_argument("--network", default=None, help="Network file; switches from simulation to loaded data.")
    experiment.add_argument("--network-format", choices=NETWORK_FORMATS, default=None)
    experiment.add_argument("--covariates", default=None, help="Comma-separated covariate matrix.")
    experiment.add_argument("--labels", default=None, help="Reference community labels, one per line.")
    experiment.add_argument("--normalize-covariates", action="store_true")

    parser = argparse.ArgumentParser(prog="calsm", description="Covariate-assisted latent space models for networks.")
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("simulate", parents=[common, experiment], help="Generate and save simulated networks.")
    commands.add_parser("fit-cavi", parents=[common, experiment], help="Fit with coordinate ascent.")
    commands.add_parser("fit-svi", parents=[common, experiment], help="Fit with stochastic variational inference.")
    baseline = commands.add_parser("baseline", parents=[common, experiment], help="Run one baseline method alone.")
    baseline.add_argument("--method", required=True, choices=BASELINES)
    run = commands.add_parser("run", parents=[common, experiment], help="Full experiment: fit, baselines, metrics.")
    run.add_argument("--engine", choices=ENGINES, default=None)

    cluster = commands.add_parser("cluster", parents=[common], help="k-means communities from saved latent vectors.")
    cluster.add_argument("--latent", required=True, help="Comma-separated n x d latent matrix.")
    cluster.add_argument("--clusters", type=int, required=True)
    cluster.add_argument("--restarts", type=int, default=20)
    cluster.add_argument("--labels", default=None, help="Reference labels; reports the Rand index.")

    evaluate = commands.add_parser("evaluate", parents=[common], help="Score an emitted result directory.")
    evaluate.add_argument("--results", required=True, help="Directory written by run/fit-*/baseline.")
    evaluate.add_argument("--truth-probabilities", default=None, help="Comma-separated n x n true probabilities.")
    evaluate.add_argument("--labels", default=None, help="Reference labels for the Rand index.")
    return parser


def collect_overrides(args: argparse.Namespace, config: Any) -> List[str]:
    """Translate command-line flags into dotted config overrides; explicit --set entries win."""
    overrides: List[str] = []

    def put(key: str, value: Any) -> None:
        overrides.append(f"{key}={json.dumps(value)}")

    data_mode = args.network is not None or config.get("data") is not None
    if args.seed is not None:
        put("seed", args.seed)
    if args.out is not None:
        put("output_dir", args.out)
    if args.d is not None:
        put("model.d", args.d)

    if data_mode:
        if args.network is not None:
            put("data.network_path", args.network)
        if args.network_format is not None:
            put("data.network_format", args.network_format)
        if args.covariates is not None:
            put("data.covariates_path", args.covariates)
        if args.labels is not None:
            put("data.labels_path", args.labels)
        if args.normalize_covariates:
            put("data.normalize_covariates", True)
    else:
        if config.get("scenario") is None:
            put("scenario", {})
        for flag, key in SCENARIO_FLAGS:
            value = getattr(args, flag)
            if value is not None:
                put(f"scenario.{key}", value)
        if args.community:
            put("scenario.community", True)

    if args.replicates is not None:
        put("replicates", args.replicates)
    if args.metrics is not None:
        put("metrics", args.metrics)
    if args.baselines is not None:
        put("baselines", args.baselines)
    if args.clusters is not None:
        put("clustering.k", args.clusters)

    if args.command == "fit-cavi":
        put("engine.name", "cavi")
    elif args.command == "fit-svi":
        put("engine.name", "svi")
    elif args.command == "run" and args.engine is not None:
        put("engine.name", args.engine)
    elif args.command == "baseline":
        put("primary", args.method)
        put("baselines", [])

    # Single-method commands only score when asked to.
    if args.command != "run" and args.metrics is None and "metrics" not in config:
        put("metrics", [])
    return overrides + list(args.overrides)


def read_workers() -> int:
    load_dotenv()
    raw = os.getenv(WORKERS_VARIABLE, "1")
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigurationError(f"{WORKERS_VARIABLE} must be an integer, got '{raw}'.")
    if workers < 1:
        raise ConfigurationError(f"{WORKERS_VARIABLE} must be at least 1, got {workers}.")
    return workers


def make_utilities(config_path: Optional[str]) -> UtilitiesBundle:
    if config_path is None:
        return UtilitiesBundle(config_path="", config={})
    if not os.path.exists(config_path):
        raise ConfigurationError(f"Config file does not exist: {config_path}")
    return UtilitiesBundle(config_path=config_path)


def command_experiment(args: argparse.Namespace, utilities: UtilitiesBundle, workers: int) -> None:
    utilities.config_utility.apply_overrides(collect_overrides(args, utilities.config))
    if args.command == "simulate":
        command_simulate(utilities, workers)
        return
    creator = ExperimentCreator(utilities=utilities, workers=workers)
    bundle = creator.run_experiment()
    for row in bundle.metrics:
        print(f"{row['replicate']}\t{row['method']}\t{row['metric']}\t{row['value']:.12g}")
    print(f"Results written to {creator.experiment.output_dir}")


def command_simulate(utilities: UtilitiesBundle, workers: int) -> None:
    config = parse_experiment(utilities.config, utilities.logger)
    if config.scenario is None:
        raise ConfigurationError("simulate needs a scenario, not a data section.")
    if config.replicates < 1:
        raise ConfigurationError(f"replicates must be at least 1, got {config.replicates}")
    grid = ScenarioGrid(base=config.scenario, replicates=config.replicates, master_seed=config.seed)
    rows = SimulationAssistant(utilities=utilities, workers=workers).write_grid(grid, config.output_dir)
    print(f"Wrote {len(rows)} simulated replicate(s) to {config.output_dir}")


def command_cluster(args: argparse.Namespace, utilities: UtilitiesBundle) -> None:
    if args.clusters < 1:
        raise ConfigurationError(f"--clusters must be at least 1, got {args.clusters}")
    for path in filter(None, (args.latent, args.labels)):
        if not os.path.exists(path):
            raise ConfigurationError(f"Input file does not exist: {path}")
    latent = np.loadtxt(args.latent, delimiter=",", ndmin=2)
    seed = args.seed if args.seed is not None else 0
    partition = cluster_latents(latent, args.clusters, restarts=args.restarts, rng=np.random.default_rng(seed))
    out = args.out if args.out is not None else "."
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "cluster_labels.csv")
    np.savetxt(path, partition.labels.reshape(-1, 1), fmt="%d", delimiter=",", header=f"seed={seed}")
    utilities.logger.info(f"Cluster labels written to {path} (objective={partition.objective:.6g})")
    if args.labels is not None:
        reference = np.loadtxt(args.labels, delimiter=",", dtype=np.int64, ndmin=1)
        print(f"ri\t{rand_index(partition, reference):.12g}")


def command_evaluate(args: argparse.Namespace, utilities: UtilitiesBundle) -> None:
    if args.truth_probabilities is None and args.labels is None:
        raise ConfigurationError("evaluate needs --truth-probabilities and/or --labels.")
    for path in filter(None, (args.truth_probabilities, args.labels)):
        if not os.path.exists(path):
            raise ConfigurationError(f"Input file does not exist: {path}")
    bundle = StorageAssistant(utilities=utilities).load_results(args.results)
    if args.truth_probabilities is not None:
        truth = np.loadtxt(args.truth_probabilities, delimiter=",", ndmin=2)
        print(f"pcc\t{upper_triangle_pcc(truth, bundle.probabilities):.12g}")
    if args.labels is not None:
        if bundle.cluster_labels is None:
            raise ConfigurationError(f"No cluster labels in {args.results}; rerun with --clusters.")
        reference = np.loadtxt(args.labels, delimiter=",", dtype=np.int64, ndmin=1)
        print(f"ri\t{rand_index(bundle.cluster_labels, reference):.12g}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point of the command-line interface.

    Returns:
        int: 0 on success, 1 when inputs are rejected or a stage fails.
    """
    args = build_parser().parse_args(argv)
    logger = logging.getLogger("calsm_logger")
    try:
        utilities = make_utilities(args.config)
        logger = utilities.logger
        if args.command == "cluster":
            command_cluster(args, utilities)
        elif args.command == "evaluate":
            command_evaluate(args, utilities)
        else:
            command_experiment(args, utilities, read_workers())
    except (ValueError, RuntimeError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 1
    return 0
