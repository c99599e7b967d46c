import csv
import json
from typing import List

from calsm.formats.simulation import ManifestRow
from calsm.utilities.bundle import UtilitiesBundle

MANIFEST_COLUMNS = ("cell", "replicate", "derived_seed", "scenario", "network_path", "covariates_path")


class ManifestManager:
    """Tab-separated index of generated scenarios: one row per (cell, replicate)."""

    def __init__(self, utilities: UtilitiesBundle) -> None:
        self.utilities: UtilitiesBundle = utilities

    def write_manifest(self, rows: List[ManifestRow], path: str) -> None:
        try:
            with open(path, "w", encoding="utf-8", newline="") as handle:
                writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
                writer.writerow(MANIFEST_COLUMNS)
                for row in rows:
                    writer.writerow(
                        [
                            row["cell"],
                            row["replicate"],
                            row["derived_seed"],
                            json.dumps(row["scenario"], sort_keys=True),
                            row["network_path"],
                            row["covariates_path"],
                        ]
                    )
        except OSError as e:
            self.utilities.logger.error(f"Error writing manifest {path}: {e}")
            raise
        self.utilities.logger.info(f"Manifest with {len(rows)} rows written to {path}")

    def read_manifest(self, path: str) -> List[ManifestRow]:
        rows: List[ManifestRow] = []
        with open(path, "r", encoding="utf-8", newline="") as handle:
            for record in csv.DictReader(handle, delimiter="\t"):
                rows.append(
                    ManifestRow(
                        cell=int(record["cell"]),
                        replicate=int(record["replicate"]),
                        derived_seed=int(record["derived_seed"]),
                        scenario=json.loads(record["scenario"]),
                        network_path=record["network_path"],
                        covariates_path=record["covariates_path"],
                    )
                )
        return rows
