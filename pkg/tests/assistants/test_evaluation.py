import numpy as np
import pytest

from calsm.assistants.evaluation import EvaluationAssistant
from calsm.formats.experiment import Dataset, MethodResult
from calsm.formats.simulation import SimScenario
from calsm.services.simulation import generate


@pytest.fixture
def dataset():
    truth = generate(SimScenario.community(n=24, p=6, seed=2))
    return Dataset(replicate=0, network=truth.network, covariates=truth.z, truth=truth, labels=truth.true_labels)


@pytest.fixture
def results(dataset):
    truth = dataset.truth
    rng = np.random.default_rng(0)
    noisy = truth.true_probabilities() + rng.normal(scale=0.05, size=(24, 24))
    # One direction per reference community, so k-means on normalised rows recovers them exactly.
    ids = np.unique(dataset.labels, return_inverse=True)[1].reshape(-1)
    angles = 2 * np.pi * ids / (ids.max() + 1)
    separated = np.column_stack([np.cos(angles), np.sin(angles)])
    return {
        "calsm": MethodResult(method="calsm", probabilities=truth.true_probabilities(), latent=separated),
        "svd_y": MethodResult(method="svd_y", probabilities=(noisy + noisy.T) / 2, latent=rng.normal(size=(24, 2))),
    }


def test_metric_rows_ordered_by_metric_then_method(mock_utilities_bundle, dataset, results):
    rows, partitions = EvaluationAssistant(utilities=mock_utilities_bundle).evaluate(
        dataset, results, ["pcc", "pcc_diff", "ri", "ri_diff"]
    )
    assert [(r["metric"], r["method"]) for r in rows] == [
        (metric, method) for metric in ("pcc", "pcc_diff", "ri", "ri_diff") for method in ("calsm", "svd_y")
    ]
    values = {(r["metric"], r["method"]): r["value"] for r in rows}
    assert values[("pcc", "calsm")] == pytest.approx(1.0)
    assert values[("pcc_diff", "calsm")] == pytest.approx(-values[("pcc_diff", "svd_y")])
    assert values[("ri", "calsm")] == pytest.approx(1.0)
    assert set(partitions) == {"calsm", "svd_y"}
    assert partitions["calsm"].k == int(np.unique(dataset.labels).size)


def test_clusters_only_when_requested(mock_utilities_bundle, dataset, results):
    assistant = EvaluationAssistant(utilities=mock_utilities_bundle)
    _, partitions = assistant.evaluate(dataset, results, ["pcc"])
    assert partitions == {}
    _, partitions = assistant.evaluate(dataset, results, ["pcc"], k=3)
    assert partitions["svd_y"].k == 3


def test_constant_estimate_gives_nan_with_warning(mock_utilities_bundle, dataset, results):
    results["svd_y"].probabilities = np.full((24, 24), 0.3)
    rows, _ = EvaluationAssistant(utilities=mock_utilities_bundle).evaluate(dataset, results, ["pcc"])
    assert np.isnan(rows[1]["value"])
    mock_utilities_bundle.logger.warning.assert_called_once()


def test_clustering_is_seeded_per_method_and_replicate(mock_utilities_bundle, dataset, results):
    first = EvaluationAssistant(utilities=mock_utilities_bundle, seed=3).cluster(results["svd_y"], 3, replicate=0)
    second = EvaluationAssistant(utilities=mock_utilities_bundle, seed=3).cluster(results["svd_y"], 3, replicate=0)
    np.testing.assert_array_equal(first.labels, second.labels)
