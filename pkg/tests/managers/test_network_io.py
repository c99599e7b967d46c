import numpy as np
import pytest

from calsm.formats.covariates import Covariates
from calsm.formats.network import Network
from calsm.managers.network_io import NetworkIOManager
from calsm.utilities.errors import DataFormatError, DimensionMismatchError


@pytest.fixture
def manager(mock_utilities_bundle):
    return NetworkIOManager(utilities=mock_utilities_bundle)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_edge_list_with_header_keeps_isolated_nodes(manager, tmp_path):
    path = write(tmp_path, "net.tsv", "# n=5\n# comment\n0\t1\n1 2\n\n2\t1\n")
    net = manager.load_network(path)
    assert net.n == 5
    assert net.num_edges == 2
    np.testing.assert_array_equal(net.positive_edges, [[0, 1], [1, 2]])


def test_edge_list_infers_node_count(manager, tmp_path):
    net = manager.load_network(write(tmp_path, "net.tsv", "3\t0\n"))
    assert net.n == 4
    assert net.adjacency[0, 3] == 1


def test_edge_list_drops_self_loops_with_warning(manager, mock_utilities_bundle, tmp_path):
    net = manager.load_network(write(tmp_path, "net.tsv", "0\t0\n0\t1\n"))
    assert net.num_edges == 1
    mock_utilities_bundle.logger.warning.assert_called_once()


@pytest.mark.parametrize(
    "text, line",
    [("0\t1\n1\tx\n", 2), ("0\t1\t2\n", 1), ("0\t-1\n", 1), ("# n=2\n0\t1\n1\t5\n", 3), ("# n=two\n", 1)],
)
def test_edge_list_errors_name_the_line(manager, tmp_path, text, line):
    with pytest.raises(DataFormatError) as excinfo:
        manager.load_network(write(tmp_path, "bad.tsv", text))
    assert excinfo.value.line == line
    assert f"line {line}" in str(excinfo.value)


def test_dense_network(manager, tmp_path):
    net = manager.load_network(write(tmp_path, "net.csv", "0,1,0\n1,0,1\n0,1,0\n"), network_format="dense_csv")
    assert net == Network.from_edges(3, [(0, 1), (1, 2)])


@pytest.mark.parametrize(
    "text, cell",
    [("0,1\n1,2\n", (2, 2)), ("0,1\n0,0\n", (1, 2)), ("0,a\n1,0\n", (1, 2))],
)
def test_dense_errors_name_the_cell(manager, tmp_path, text, cell):
    with pytest.raises(DataFormatError) as excinfo:
        manager.load_network(write(tmp_path, "bad.csv", text), network_format="dense_csv")
    assert excinfo.value.cell == cell


def test_dense_rejects_non_square_and_ragged(manager, tmp_path):
    with pytest.raises(DataFormatError):
        manager.load_network(write(tmp_path, "wide.csv", "0,1,0\n1,0,1\n"), network_format="dense_csv")
    with pytest.raises(DataFormatError):
        manager.load_network(write(tmp_path, "ragged.csv", "0,1\n1\n"), network_format="dense_csv")


def test_unknown_format(manager, tmp_path):
    with pytest.raises(ValueError):
        manager.load_network(write(tmp_path, "net.tsv", "0\t1\n"), network_format="graphml")


def test_missing_file_is_logged(manager, mock_utilities_bundle, tmp_path):
    with pytest.raises(FileNotFoundError):
        manager.load_network(str(tmp_path / "absent.tsv"))
    mock_utilities_bundle.logger.error.assert_called_once()


def test_covariates_load_and_normalize(manager, tmp_path):
    path = write(tmp_path, "z.csv", "# p=2\n3,4\n0,0\n")
    cov = manager.load_covariates(path, normalize=True, expected_n=2)
    np.testing.assert_allclose(cov.z, [[0.6, 0.8], [0.0, 0.0]])


def test_covariates_row_count_mismatch(manager, tmp_path):
    with pytest.raises(DimensionMismatchError):
        manager.load_covariates(write(tmp_path, "z.csv", "1,2\n"), expected_n=3)


@pytest.mark.parametrize("network_format", ["edge_list", "dense_csv"])
def test_network_save_load(manager, tmp_path, network_format):
    net = Network.from_edges(6, [(0, 3), (2, 4)])
    path = str(tmp_path / "net.out")
    manager.save_network(net, path, network_format=network_format)
    assert manager.load_network(path, network_format=network_format) == net


def test_covariates_save_load(manager, tmp_path):
    cov = Covariates(np.array([[0.1, -2.5], [1e-7, 3.0]]))
    path = str(tmp_path / "z.csv")
    manager.save_covariates(cov, path)
    np.testing.assert_allclose(manager.load_covariates(path).z, cov.z, rtol=1e-11)


def test_dense_self_loop_is_dropped_with_warning(manager, mock_utilities_bundle, tmp_path):
    net = manager.load_network(write(tmp_path, "loop.csv", "1,0\n0,0\n"), network_format="dense_csv")
    assert net.num_edges == 0
    assert net.adjacency[0, 0] == 0
    mock_utilities_bundle.logger.warning.assert_called_once()


def test_covariates_without_columns_load_as_empty(manager, tmp_path):
    path = str(tmp_path / "z0.csv")
    manager.save_covariates(Covariates.empty(4), path)
    cov = manager.load_covariates(path, expected_n=4)
    assert (cov.n, cov.p) == (4, 0)
