import os
from typing import List, Tuple

import numpy as np

from calsm.formats.experiment import Dataset
from calsm.formats.simulation import ManifestRow, ScenarioGrid, SimScenario, SimTruth
from calsm.managers.manifest import ManifestManager
from calsm.managers.network_io import NetworkIOManager
from calsm.services.simulation import run_scenario_grid
from calsm.utilities.bundle import UtilitiesBundle


class SimulationAssistant:
    """
    Produces simulated replicates of a scenario and, for the `simulate` command, persists
    them next to a manifest.
    """

    def __init__(self, utilities: UtilitiesBundle, workers: int = 1) -> None:
        self.utilities = utilities
        self.workers = workers
        self.network_io_manager = NetworkIOManager(utilities=self.utilities)
        self.manifest_manager = ManifestManager(utilities=self.utilities)

    def simulate(self, scenario: SimScenario, replicates: int, master_seed: int) -> List[Dataset]:
        grid = ScenarioGrid(base=scenario, replicates=replicates, master_seed=master_seed)
        generated = run_scenario_grid(grid, workers=self.workers, logger=self.utilities.logger)
        return [
            Dataset(replicate=replicate, network=truth.network, covariates=truth.z, truth=truth, labels=truth.true_labels)
            for _, replicate, truth in generated
        ]

    def generate_grid(self, grid: ScenarioGrid) -> List[Tuple[int, int, SimTruth]]:
        return run_scenario_grid(grid, workers=self.workers, logger=self.utilities.logger)

    def save_truth(self, truth: SimTruth, directory: str, stem: str) -> Tuple[str, str]:
        """Write network, covariates and the generating parameters of one replicate; returns (network, covariates) paths."""
        os.makedirs(directory, exist_ok=True)
        network_path = os.path.join(directory, f"{stem}_network.tsv")
        covariates_path = os.path.join(directory, f"{stem}_covariates.csv")
        self.network_io_manager.save_network(truth.network, network_path)
        self.network_io_manager.save_covariates(truth.z, covariates_path)
        header = f"seed={truth.scenario.seed}"
        np.savetxt(os.path.join(directory, f"{stem}_x_star.csv"), truth.x_star, fmt="%.12g", delimiter=",", header=header)
        np.savetxt(os.path.join(directory, f"{stem}_b_star.csv"), truth.b_star, fmt="%.12g", delimiter=",", header=header)
        if truth.true_labels is not None:
            np.savetxt(
                os.path.join(directory, f"{stem}_labels.csv"), truth.true_labels, fmt="%d", delimiter=",", header=header
            )
        return network_path, covariates_path

    def write_grid(self, grid: ScenarioGrid, directory: str) -> List[ManifestRow]:
        """Generate the grid, save every replicate and write manifest.tsv into `directory`."""
        rows: List[ManifestRow] = []
        for cell, replicate, truth in self.generate_grid(grid):
            network_path, covariates_path = self.save_truth(truth, directory, f"cell{cell}_rep{replicate}")
            rows.append(
                ManifestRow(
                    cell=cell,
                    replicate=replicate,
                    derived_seed=truth.scenario.seed,
                    scenario=truth.scenario.to_dict(),
                    network_path=network_path,
                    covariates_path=covariates_path,
                )
            )
        self.manifest_manager.write_manifest(rows, os.path.join(directory, "manifest.tsv"))
        return rows
