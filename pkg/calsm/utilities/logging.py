import json
import logging
import logging.config
from typing import Any, Mapping, Optional


class LoggingUtility:
    """
    Configures the `calsm_logger` for an experiment run.

    The dictConfig document comes from `logging_section` when the experiment config is already in
    memory, otherwise from the "logging" key of the JSON file at `config_path`. A missing,
    unreadable or rejected document leaves the process on logging.basicConfig(level=default_level).
    A logger passed in explicitly is used untouched.

    Example:
        logger = LoggingUtility(config_path="configs/probability_recovery.json").logger
        logger.info("Fitting started")
    """

    def __init__(
        self,
        logger: Optional[logging.Logger] = None,
        config_path: str = "config.json",
        default_level: int = logging.INFO,
        logger_name: str = "calsm_logger",
        logging_section: Optional[Mapping[str, Any]] = None,
    ):
        if logger is not None:
            self.logger = logger
        else:
            self.logger = logging.getLogger(logger_name)
            section = logging_section if logging_section is not None else self._read_section(config_path)
            self._apply(section, default_level, source=config_path)

        if not isinstance(self.logger, logging.Logger):
            raise TypeError("LoggingUtility.logger is not an instance of logging.Logger")

    @staticmethod
    def _read_section(config_path: str) -> Any:
        """Returns the "logging" entry of the config file, or the read error to report."""
        try:
            with open(config_path, "rt") as file:
                return json.load(file).get("logging")
        except Exception as e:
            return e

    def _apply(self, section: Any, default_level: int, source: str) -> None:
        if isinstance(section, Mapping) and section:
            try:
                logging.config.dictConfig(dict(section))
                self.logger.info("Logging configuration loaded successfully.")
                return
            except Exception as e:
                section = e
        logging.basicConfig(level=default_level)
        reason = section if isinstance(section, Exception) else "no logging section"
        self.logger.warning(f"Using default logging for {source or 'in-memory config'}: {reason}")

    def _emit(self, level: int, msg: str, *args: Any, **kwargs: Any) -> None:
        self.logger.log(level, msg, *args, **kwargs)

    def debug(self, msg: str, *args: Any, **kwargs: Any) -> None:
        self._emit(logging.DEBUG, msg, *args, **kwargs)

    def info(self, msg: str, *args: Any, **kwargs: Any) -> None:
        self._emit(logging.INFO, msg, *args, **kwargs)

    def warning(self, msg: str, *args: Any, **kwargs: Any) -> None:
        self._emit(logging.WARNING, msg, *args, **kwargs)

    def error(self, msg: str, *args: Any, **kwargs: Any) -> None:
        self._emit(logging.ERROR, msg, *args, **kwargs)
