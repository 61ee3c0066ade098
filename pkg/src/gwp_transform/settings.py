"""
Settings module for experiment files.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from .core.errors import ConfigError

logger = logging.getLogger(__name__)


class Settings:
    """Raw experiment document loaded from a YAML or JSON file."""

    def __init__(self, config_path: Optional[Union[str, Path]] = None):
        """
        Initialize settings.

        Args:
            config_path: Path to configuration file
        """
        self.config_path = config_path
        self.config: Dict[str, Any] = {}

        if config_path:
            self.load_config(config_path)

    def load_config(self, config_path: Union[str, Path]) -> Dict[str, Any]:
        """
        Load configuration from file.

        Args:
            config_path: Path to configuration file

        Returns:
            Configuration dictionary

        Raises:
            FileNotFoundError: if the file does not exist
            ConfigError: on unsupported suffixes and parse errors (with line numbers)
        """
        path = Path(config_path).expanduser()
        if not path.exists():
            raise FileNotFoundError(f"Configuration file not found: {config_path}")

        text = path.read_text(encoding="utf-8")
        if path.suffix.lower() in (".yml", ".yaml"):
            self.config = self.parse_yaml(text)
        elif path.suffix.lower() == ".json":
            try:
                self.config = json.loads(text)
            except json.JSONDecodeError as e:
                raise ConfigError(f"invalid JSON at line {e.lineno}: {e.msg}") from e
        else:
            raise ConfigError(f"Unsupported configuration file format: {path.suffix}")

        if not isinstance(self.config, dict):
            raise ConfigError("top level of an experiment file must be a mapping")
        logger.debug(f"Loaded configuration from {path}")
        return self.config

    @staticmethod
    def parse_yaml(text: str) -> Dict[str, Any]:
        """Parse a YAML document, reporting the offending line on failure."""
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            where = f" at line {mark.line + 1}" if mark is not None else ""
            problem = getattr(e, "problem", None) or str(e)
            raise ConfigError(f"invalid YAML{where}: {problem}") from e
        return data if data is not None else {}

    def get(self, key: str, default: Any = None) -> Any:
        return self.config.get(key, default)

    def set(self, key: str, value: Any) -> None:
        self.config[key] = value
