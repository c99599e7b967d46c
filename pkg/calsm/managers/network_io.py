from typing import List, Optional, Set, Tuple

import numpy as np

from calsm.formats.covariates import Covariates
from calsm.formats.network import Network
from calsm.utilities.bundle import UtilitiesBundle
from calsm.utilities.errors import DataFormatError, DimensionMismatchError

NODE_COUNT_PREFIX = "# n="


class NetworkIOManager:
    """
    Reads and writes networks and covariate matrices.

    Edge lists hold one "i<TAB>j" pair of 0-based node ids per line; an optional
    "# n=<count>" header fixes the node count so isolated trailing nodes survive a round
    trip. Dense networks and covariates are comma-separated matrices. Lines starting
    with "#" are comments.

    Attributes:
        utilities (UtilitiesBundle): A bundle of utility instances including logging and config utilities.
    """

    def __init__(self, utilities: UtilitiesBundle) -> None:
        self.utilities: UtilitiesBundle = utilities

    def load_network(self, path: str, network_format: str = "edge_list") -> Network:
        """
        Load a network from disk.

        Args:
            path (str): File to read.
            network_format (str): "edge_list" or "dense_csv".

        Returns:
            Network: The parsed undirected network.

        Raises:
            DataFormatError: On unparsable lines, out-of-range ids, non-binary cells or asymmetric input.
            FileNotFoundError: If the file does not exist.
        """
        self.utilities.logger.debug(f"Loading {network_format} network from {path}")
        if network_format == "edge_list":
            network = self._load_edge_list(path)
        elif network_format == "dense_csv":
            network = self._load_dense(path)
        else:
            raise ValueError(f"Unknown network format '{network_format}'.")
        self.utilities.logger.info(f"Loaded network with {network.n} nodes and {network.num_edges} edges from {path}")
        return network

    def _read_lines(self, path: str) -> List[str]:
        try:
            with open(path, "r", encoding="utf-8") as handle:
                return handle.read().splitlines()
        except FileNotFoundError:
            self.utilities.logger.error(f"File not found: {path}")
            raise
        except OSError as e:
            self.utilities.logger.error(f"Error reading file {path}: {e}")
            raise

    def _fail(self, error: DataFormatError) -> DataFormatError:
        self.utilities.logger.error(str(error))
        return error

    def _load_edge_list(self, path: str) -> Network:
        declared_n: Optional[int] = None
        pairs: List[Tuple[int, int, int]] = []
        for line_number, raw in enumerate(self._read_lines(path), start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith(NODE_COUNT_PREFIX):
                try:
                    declared_n = int(line[len(NODE_COUNT_PREFIX) :])
                except ValueError:
                    raise self._fail(DataFormatError(path, f"bad node count header '{line}'", line=line_number))
                continue
            if line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 2:
                raise self._fail(DataFormatError(path, f"expected two node ids, got '{line}'", line=line_number))
            try:
                i, j = int(fields[0]), int(fields[1])
            except ValueError:
                raise self._fail(DataFormatError(path, f"node ids must be integers, got '{line}'", line=line_number))
            if i < 0 or j < 0:
                raise self._fail(DataFormatError(path, f"negative node id in '{line}'", line=line_number))
            pairs.append((i, j, line_number))

        n = declared_n if declared_n is not None else (max(max(i, j) for i, j, _ in pairs) + 1 if pairs else 0)
        edges: Set[Tuple[int, int]] = set()
        self_loops = 0
        for i, j, line_number in pairs:
            if i >= n or j >= n:
                raise self._fail(DataFormatError(path, f"node id out of range for n={n}", line=line_number))
            if i == j:
                self_loops += 1
                continue
            edges.add((min(i, j), max(i, j)))
        if self_loops:
            self.utilities.logger.warning(f"Dropped {self_loops} self-loop(s) while loading {path}")
        return Network.from_edges(n, sorted(edges))

    def _parse_matrix(self, path: str) -> List[List[float]]:
        rows: List[List[float]] = []
        width: Optional[int] = None
        for line_number, raw in enumerate(self._read_lines(path), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            cells = line.split(",")
            values = []
            for column, cell in enumerate(cells, start=1):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise self._fail(
                        DataFormatError(path, f"non-numeric cell '{cell.strip()}'", cell=(line_number, column))
                    )
            if width is not None and len(values) != width:
                raise self._fail(
                    DataFormatError(path, f"expected {width} columns, got {len(values)}", line=line_number)
                )
            width = len(values)
            rows.append(values)
        return rows

    def _load_dense(self, path: str) -> Network:
        rows = self._parse_matrix(path)
        if not rows and expected_n is not None:
            self.utilities.logger.info(f"Covariate file {path} has no columns; using p=0 for {expected_n} nodes")
            return Covariates.empty(expected_n)
        matrix = np.array(rows, dtype=np.float64).reshape(len(rows), -1) if rows else np.zeros((0, 0))
        n = matrix.shape[0]
        if matrix.shape[1] != n:
            raise self._fail(DataFormatError(path, f"dense network must be square, got shape {matrix.shape}"))
        non_binary = np.argwhere((matrix != 0) & (matrix != 1))
        if non_binary.size:
            row, column = (int(v) + 1 for v in non_binary[0])
            raise self._fail(DataFormatError(path, "entries must be 0 or 1", cell=(row, column)))
        asymmetric = np.argwhere(matrix != matrix.T)
        if asymmetric.size:
            row, column = (int(v) + 1 for v in asymmetric[0])
            raise self._fail(DataFormatError(path, "matrix is not symmetric", cell=(row, column)))
        self_loops = int(np.count_nonzero(np.diag(matrix)))
        if self_loops:
            self.utilities.logger.warning(f"Dropped {self_loops} self-loop(s) while loading {path}")
        return Network(matrix.astype(np.int8))

    def load_covariates(self, path: str, normalize: bool = False, expected_n: Optional[int] = None) -> Covariates:
        """
        Load a comma-separated covariate matrix, optionally normalising rows to unit norm.

        Args:
            path (str): File to read; lines starting with "#" are skipped.
            normalize (bool): Scale every row to unit norm.
            expected_n (Optional[int]): Node count the rows must match.

        Returns:
            Covariates: The n x p matrix.

        Raises:
            DimensionMismatchError: If `expected_n` is given and the row count differs.
            DataFormatError: On non-numeric cells (reported with their row and column) or ragged rows.
        """
        rows = self._parse_matrix(path)
        z = np.array(rows, dtype=np.float64).reshape(len(rows), -1) if rows else np.zeros((0, 0))
        if expected_n is not None and z.shape[0] != expected_n:
            self.utilities.logger.error(f"Covariate file {path} has {z.shape[0]} rows, network has {expected_n} nodes")
            raise DimensionMismatchError("n", expected_n, z.shape[0], path)
        self.utilities.logger.info(f"Loaded covariates of shape {z.shape} from {path} (normalize={normalize})")
        return Covariates(z, normalize=normalize)

    def save_network(self, network: Network, path: str, network_format: str = "edge_list") -> None:
        """Write a network in either supported format; the inverse of load_network."""
        try:
            if network_format == "edge_list":
                with open(path, "w", encoding="utf-8") as handle:
                    handle.write(f"{NODE_COUNT_PREFIX}{network.n}\n")
                    for i, j in network.positive_edges:
                        handle.write(f"{i}\t{j}\n")
            elif network_format == "dense_csv":
                np.savetxt(path, network.adjacency, fmt="%d", delimiter=",")
            else:
                raise ValueError(f"Unknown network format '{network_format}'.")
        except OSError as e:
            self.utilities.logger.error(f"Error writing network to {path}: {e}")
            raise
        self.utilities.logger.debug(f"Saved {network!r} to {path}")

    def save_covariates(self, covariates: Covariates, path: str) -> None:
        try:
            np.savetxt(path, covariates.z, fmt="%.12g", delimiter=",", header=f"p={covariates.p}")
        except OSError as e:
            self.utilities.logger.error(f"Error writing covariates to {path}: {e}")
            raise
        self.utilities.logger.debug(f"Saved {covariates!r} to {path}")
