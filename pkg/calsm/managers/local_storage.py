import os
import shutil
import tempfile

from calsm.utilities.bundle import UtilitiesBundle

STAGING_PREFIX = ".staging-"


class LocalStorageManager:
    """
    Manages local file operations: output directories and the staging directory a run
    writes into before its results are published.

    Attributes:
        utilities (UtilitiesBundle): A bundle of utility instances including logging and config utilities.
    """

    def __init__(self, utilities: UtilitiesBundle) -> None:
        self.utilities: UtilitiesBundle = utilities

    def ensure_directory(self, directory: str) -> None:
        try:
            os.makedirs(directory, exist_ok=True)
        except OSError as e:
            self.utilities.logger.error(f"Error creating directory {directory}: {e}")
            raise

    def create_staging_directory(self, directory: str) -> str:
        """
        Creates a fresh, uniquely named staging directory inside `directory`.

        Returns:
            str: The path of the staging directory.
        """
        self.ensure_directory(directory)
        try:
            staging = tempfile.mkdtemp(prefix=STAGING_PREFIX, dir=directory)
        except OSError as e:
            self.utilities.logger.error(f"Error creating staging directory in {directory}: {e}")
            raise
        self.utilities.logger.debug(f"Staging outputs in {staging}")
        return staging

    def remove_directory(self, path: str) -> bool:
        """
        Best-effort recursive removal. A missing directory is not an error.

        Returns:
            bool: True if the directory existed and was removed.
        """
        if not os.path.isdir(path):
            return False
        try:
            shutil.rmtree(path)
            self.utilities.logger.debug(f"Directory removed: {path}")
            return True
        except OSError as e:
            self.utilities.logger.warning(f"Could not remove directory {path}: {e}")
            return False
