import logging
from typing import Any, Dict, Mapping, Optional

from calsm.utilities.config import ConfigUtility
from calsm.utilities.logging import LoggingUtility


class UtilitiesBundle:
    """
    A utility bundle class that provides centralized access to configuration and logging.

    This class consolidates two utility classes into a single bundle:
    - `LoggingUtility`: Manages logging configuration and provides a logger instance.
    - `ConfigUtility`: Loads and manages the experiment configuration.

    Attributes:
        logger (logging.Logger): The logger instance used by the application.
        config_utility (ConfigUtility): An instance of ConfigUtility to manage the configuration.

    Args:
        config_path (str): The path to the configuration file (default: "config.json").
        default_logging_level (int):
            The default logging level to be used if the configuration is not loaded
            (default: logging.INFO).
        logger (Optional[logging.Logger]): An optional pre-configured logger.
            If provided, this logger will be used. If not, a new logger is created.
        config (Optional[Dict[str, Any]]): A configuration dictionary used instead of reading config_path.

    Example:
        bundle = UtilitiesBundle(config_path="configs/probability_recovery.json")
        bundle.logger.info("Experiment started")
        d = bundle.config_utility.get_with_default("model.d", 2)
    """

    def __init__(
        self,
        config_path: str = "config.json",
        default_logging_level: int = logging.INFO,
        logger: Optional[logging.Logger] = None,
        config: Optional[Dict[str, Any]] = None,
    ) -> None:
        self.logger = LoggingUtility(
            logger=logger,
            config_path=config_path,
            default_level=default_logging_level,
            logging_section=config.get("logging") if config is not None else None,
        ).logger

        self.config_utility = ConfigUtility(logger=self.logger, config=config, config_path=config_path)

    @property
    def config(self) -> Mapping[str, Any]:
        """
        Retrieve the loaded configuration as an immutable mapping.

        Overrides applied through `config_utility.apply_overrides` are visible here.
        """
        return self.config_utility.get_config()
