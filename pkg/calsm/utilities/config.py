import copy
import json
import logging
from types import MappingProxyType
from typing import Any, Dict, Iterable, Mapping, Optional

from calsm.utilities.errors import ConfigurationError


class ConfigUtility:
    """
    A utility class for loading and managing experiment configuration from a JSON file.

    Nested sections are addressed with dotted keys ("engine.svi.batch_size") both for
    lookups and for command-line overrides.
    """

    def __init__(
        self,
        logger: logging.Logger,
        config: Optional[Dict[str, Any]] = None,
        config_path: Optional[str] = "config.json",
    ) -> None:
        """
        Initialize the ConfigUtility with a logger and optional config dictionary.

        Args:
            logger (logging.Logger): Logger instance for logging information and errors.
            config (Optional[Dict[str, Any]]): Optional config dictionary to use directly.
            config_path (Optional[str]): Path to the JSON configuration file. Default is "config.json".
        """
        self.logger = logger
        self.config_path = config_path

        if config is not None and not isinstance(config, dict):
            raise TypeError("Provided config must be a dictionary.")
        self.config = MappingProxyType(config) if config is not None else self._load_config()

    def _load_config(self) -> "MappingProxyType[str, Any]":
        """
        Load configuration from the JSON file and return it as an immutable MappingProxyType.

        Raises:
            FileNotFoundError: If the config file is not found.
            ValueError: If the config file is not valid JSON.
            TypeError: If the config file does not contain a valid dictionary.
        """
        if not self.config_path:
            raise ValueError("Config path is not provided.")

        try:
            with open(self.config_path, "r") as file:
                config = json.load(file)
                if not isinstance(config, dict):
                    raise TypeError("Config file does not contain a valid dictionary.")
                self.logger.info(f"Config loaded from {self.config_path}.")
                return MappingProxyType(config)
        except FileNotFoundError:
            self.logger.error(f"Config file not found: {self.config_path}")
            raise
        except json.JSONDecodeError:
            self.logger.error(f"Config file is not valid JSON: {self.config_path}")
            raise ValueError(f"Config file is not valid JSON: {self.config_path}")

    def get_config(self) -> "MappingProxyType[str, Any]":
        """Return the loaded configuration."""
        return self.config

    def reload_config(self) -> None:
        """Reload the configuration from the file specified by config_path."""
        self.config = self._load_config()
        self.logger.info("Config reloaded successfully.")

    def get_with_default(self, key: str, default: Any = None) -> Any:
        """
        Retrieve a configuration value with a default fallback.

        The key may be dotted to reach into nested sections.

        Example:
            batch_size = config_utility.get_with_default("engine.svi.batch_size", 1024)
        """
        node: Any = self.config
        for part in key.split("."):
            if not isinstance(node, Mapping) or part not in node:
                return default
            node = node[part]
        return node

    def apply_overrides(self, overrides: Iterable[str]) -> None:
        """
        Apply "dotted.key=value" overrides on top of the loaded configuration.

        Values are parsed as JSON when possible ("256" -> 256, "true" -> True) and kept
        as raw strings otherwise.

        Raises:
            ConfigurationError: If an override is not of the form key=value.
        """
        updated: Dict[str, Any] = copy.deepcopy(dict(self.config))
        for override in overrides:
            if "=" not in override:
                self.logger.error(f"Malformed config override: {override}")
                raise ConfigurationError(f"Override must look like section.key=value, got: {override}")
            key, raw_value = override.split("=", 1)
            try:
                value: Any = json.loads(raw_value)
            except json.JSONDecodeError:
                value = raw_value

            node = updated
            parts = key.strip().split(".")
            for part in parts[:-1]:
                child = node.get(part)
                if not isinstance(child, dict):
                    child = {}
                    node[part] = child
                node = child
            node[parts[-1]] = value
            self.logger.debug(f"Config override applied: {key}={value!r}")
        self.config = MappingProxyType(updated)
