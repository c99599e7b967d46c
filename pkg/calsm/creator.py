import json
import logging
import os
from dataclasses import asdict, fields
from typing import Any, Dict, List, Mapping, Optional

from calsm.director import Director
from calsm.formats.cavi import FitOptions
from calsm.formats.experiment import BASELINES, ENGINES, METRICS, NETWORK_FORMATS, DataSource, ExperimentConfig, ResultBundle
from calsm.formats.model import ModelConfig
from calsm.formats.simulation import SimScenario
from calsm.formats.svi import SviConfig
from calsm.strategies.cavi import CaviStrategy
from calsm.strategies.lsm import LsmStrategy
from calsm.strategies.method import MethodStrategy
from calsm.strategies.svd import SvdYStrategy, SvdYZStrategy
from calsm.strategies.svi import SviStrategy
from calsm.utilities.bundle import UtilitiesBundle
from calsm.utilities.errors import ConfigurationError

CAVI_COMMUNITY_CYCLES = 500


def _section(config: Mapping[str, Any], key: str) -> Dict[str, Any]:
    value = config.get(key) or {}
    if not isinstance(value, Mapping):
        raise ConfigurationError(f"Config section '{key}' must be an object, got {type(value).__name__}.")
    return dict(value)


def _known(cls: Any, values: Dict[str, Any], section: str) -> Dict[str, Any]:
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ConfigurationError(f"Unknown keys in '{section}': {unknown}")
    return values


def echo_config(experiment: ExperimentConfig) -> Dict[str, Any]:
    """Plain-JSON record of every setting that determines the results."""
    record: Dict[str, Any] = {
        "model": asdict(experiment.model),
        "engine": experiment.engine,
        "primary": experiment.primary,
        "fit_options": asdict(experiment.fit_options),
        "svi": asdict(experiment.svi),
        "scenario": experiment.scenario.to_dict() if experiment.scenario is not None else None,
        "data": asdict(experiment.data) if experiment.data is not None else None,
        "metrics": experiment.metrics,
        "baselines": experiment.baselines,
        "cluster_k": experiment.cluster_k,
        "cluster_restarts": experiment.cluster_restarts,
        "replicates": experiment.replicates,
        "seed": experiment.seed,
    }
    parsed: Dict[str, Any] = json.loads(json.dumps(record))
    return parsed


def parse_experiment(config: Mapping[str, Any], logger: logging.Logger) -> ExperimentConfig:
    """
    Build an ExperimentConfig from the nested JSON configuration.

    The community scenario raises the default CAVI cycle cap to 500.

    Raises:
        ConfigurationError: On unknown keys or values rejected by the record types.
    """
    try:
        model = ModelConfig(**_known(ModelConfig, _section(config, "model"), "model"))

        engine_section = _section(config, "engine")
        engine = str(engine_section.pop("name", "cavi"))
        cavi_section = _known(FitOptions, dict(engine_section.pop("cavi", {}) or {}), "engine.cavi")
        svi_section = dict(engine_section.pop("svi", {}) or {})
        if "gamma_init" in svi_section:
            svi_section["gamma_init"] = tuple(svi_section["gamma_init"])
        svi_section.setdefault("seed", int(config.get("seed", 0)))
        svi = SviConfig(**_known(SviConfig, svi_section, "engine.svi"))

        scenario: Optional[SimScenario] = None
        if config.get("scenario") is not None:
            scenario_section = _section(config, "scenario")
            community = bool(scenario_section.pop("community", False))
            if "value_set" in scenario_section:
                scenario_section["value_set"] = tuple(scenario_section["value_set"])
            _known(SimScenario, scenario_section, "scenario")
            scenario = SimScenario.community(**scenario_section) if community else SimScenario(**scenario_section)
            if scenario.community_variant:
                cavi_section.setdefault("max_cycles", CAVI_COMMUNITY_CYCLES)
        fit_options = FitOptions(**cavi_section)

        data: Optional[DataSource] = None
        if config.get("data") is not None:
            data = DataSource(**_known(DataSource, _section(config, "data"), "data"))

        clustering = _section(config, "clustering")
        experiment = ExperimentConfig(
            model=model,
            engine=engine,
            primary=str(config.get("primary", "calsm")),
            fit_options=fit_options,
            svi=svi,
            scenario=scenario,
            data=data,
            metrics=list(config.get("metrics", ["pcc"])),
            baselines=list(config.get("baselines", [])),
            cluster_k=clustering.get("k"),
            cluster_restarts=int(clustering.get("restarts", 20)),
            replicates=int(config.get("replicates", 1)),
            output_dir=str(config.get("output_dir", "results")),
            seed=int(config.get("seed", 0)),
        )
    except ConfigurationError as e:
        logger.error(f"Invalid configuration: {e}")
        raise
    except (TypeError, ValueError) as e:
        logger.error(f"Invalid configuration: {e}")
        raise ConfigurationError(str(e)) from e

    experiment.echo = echo_config(experiment)
    return experiment


class ExperimentCreator:
    """
    ExperimentCreator turns the loaded JSON configuration (with command-line overrides
    already applied) into an ExperimentConfig, validates it before any compute, assembles
    the method strategies and hands them to the Director.
    """

    def __init__(self, utilities: UtilitiesBundle, workers: int = 1) -> None:
        self.utilities: UtilitiesBundle = utilities
        self.workers: int = max(int(workers), 1)
        self.experiment: ExperimentConfig = parse_experiment(self.utilities.config, self.utilities.logger)
        self.validate(self.experiment)
        self.strategies: Dict[str, MethodStrategy] = self.assemble_strategies()

    def validate(self, experiment: ExperimentConfig) -> None:
        """
        Reject inconsistent requests before any data is generated or loaded.

        Raises:
            ConfigurationError: Listing every problem found.
        """
        problems: List[str] = []
        if experiment.engine not in ENGINES:
            problems.append(f"engine must be one of {ENGINES}, got '{experiment.engine}'")
        if experiment.primary not in ("calsm",) + BASELINES:
            problems.append(f"primary must be 'calsm' or one of {BASELINES}, got '{experiment.primary}'")
        unknown_metrics = [m for m in experiment.metrics if m not in METRICS]
        if unknown_metrics:
            problems.append(f"unknown metrics {unknown_metrics}; choose from {METRICS}")
        unknown_baselines = [b for b in experiment.baselines if b not in BASELINES]
        if unknown_baselines:
            problems.append(f"unknown baselines {unknown_baselines}; choose from {BASELINES}")
        if (experiment.scenario is None) == (experiment.data is None):
            problems.append("exactly one of 'scenario' or 'data' must be configured")
        if experiment.replicates < 1:
            problems.append(f"replicates must be at least 1, got {experiment.replicates}")
        if experiment.cluster_k is not None and experiment.cluster_k < 1:
            problems.append(f"clustering.k must be at least 1, got {experiment.cluster_k}")

        simulated = experiment.scenario is not None
        if any(m.startswith("pcc") for m in experiment.metrics) and not simulated:
            problems.append("PCC needs true link probabilities, which only simulated data provides")
        has_labels = (experiment.scenario is not None and experiment.scenario.community_variant) or (
            experiment.data is not None and experiment.data.labels_path is not None
        )
        if any(m.startswith("ri") for m in experiment.metrics) and not has_labels:
            problems.append("RI needs reference labels: use the community scenario or set data.labels_path")
        if any(m.endswith("_diff") for m in experiment.metrics) and len(experiment.methods) < 2:
            problems.append("Diff metrics need at least two methods; add baselines")
        if "svd_yzo" in experiment.methods and not simulated:
            problems.append("svd_yzo needs the true coefficient support of simulated data")

        if experiment.data is not None:
            if experiment.data.network_format not in NETWORK_FORMATS:
                problems.append(f"data.network_format must be one of {NETWORK_FORMATS}")
            for path in (experiment.data.network_path, experiment.data.covariates_path, experiment.data.labels_path):
                if path is not None and not os.path.exists(path):
                    problems.append(f"input file does not exist: {path}")

        if problems:
            message = "; ".join(problems)
            self.utilities.logger.error(f"Configuration rejected: {message}")
            raise ConfigurationError(message)

    def assemble_strategies(self) -> Dict[str, MethodStrategy]:
        """One strategy per requested method, keyed by the method name used in the metric table."""
        experiment = self.experiment
        d = experiment.model.d
        strategies: Dict[str, MethodStrategy] = {}
        for method in experiment.methods:
            if method == "calsm":
                if experiment.engine == "svi":
                    strategies[method] = SviStrategy(
                        utilities=self.utilities, model_config=experiment.model, svi_config=experiment.svi
                    )
                else:
                    strategies[method] = CaviStrategy(
                        utilities=self.utilities,
                        model_config=experiment.model,
                        fit_options=experiment.fit_options,
                        seed=experiment.seed,
                    )
            elif method == "lsm":
                strategies[method] = LsmStrategy(
                    utilities=self.utilities,
                    model_config=experiment.model,
                    fit_options=experiment.fit_options,
                    seed=experiment.seed,
                )
            elif method == "svd_y":
                strategies[method] = SvdYStrategy(utilities=self.utilities, d=d)
            elif method == "svd_yz":
                strategies[method] = SvdYZStrategy(utilities=self.utilities, d=d)
            elif method == "svd_yzo":
                strategies[method] = SvdYZStrategy(utilities=self.utilities, d=d, oracle=True)
        return strategies

    def run_experiment(self) -> ResultBundle:
        """
        Runs the experiment by passing the assembled strategies to the Director.
        """
        self.utilities.logger.info(f"Using methods: {list(self.strategies.keys())}")
        director = Director(
            utilities=self.utilities, strategies=self.strategies, experiment=self.experiment, workers=self.workers
        )
        bundle = director.run_experiment()
        self.utilities.logger.info("Experiment finished successfully.")
        return bundle
