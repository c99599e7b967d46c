import os

import numpy as np

from calsm.assistants.simulation import SimulationAssistant
from calsm.formats.simulation import ScenarioGrid, SimScenario
from calsm.managers.manifest import ManifestManager
from calsm.managers.network_io import NetworkIOManager


def test_simulate_returns_one_dataset_per_replicate(mock_utilities_bundle):
    datasets = SimulationAssistant(utilities=mock_utilities_bundle).simulate(
        SimScenario(n=20, p=5), replicates=3, master_seed=1
    )
    assert [d.replicate for d in datasets] == [0, 1, 2]
    assert all(d.truth is not None and d.true_probabilities.shape == (20, 20) for d in datasets)
    assert datasets[0].network != datasets[1].network


def test_simulate_community_carries_labels(mock_utilities_bundle):
    datasets = SimulationAssistant(utilities=mock_utilities_bundle).simulate(
        SimScenario.community(n=30, p=8), replicates=1, master_seed=0
    )
    assert datasets[0].labels is not None
    assert datasets[0].labels.shape == (30,)


def test_write_grid_saves_replicates_and_manifest(mock_utilities_bundle, tmp_path):
    grid = ScenarioGrid(base=SimScenario(n=15, p=4), axes={"k": [1.0, 2.0]}, replicates=2, master_seed=5)
    rows = SimulationAssistant(utilities=mock_utilities_bundle, workers=2).write_grid(grid, str(tmp_path))

    assert len(rows) == 4
    assert ManifestManager(utilities=mock_utilities_bundle).read_manifest(str(tmp_path / "manifest.tsv")) == rows
    io = NetworkIOManager(utilities=mock_utilities_bundle)
    for row in rows:
        assert io.load_network(row["network_path"]).n == 15
        assert io.load_covariates(row["covariates_path"], expected_n=15).p == 4
        stem = os.path.basename(row["network_path"]).replace("_network.tsv", "")
        x_star = np.loadtxt(tmp_path / f"{stem}_x_star.csv", delimiter=",")
        assert np.max(np.abs(x_star)) == row["scenario"]["k"]
