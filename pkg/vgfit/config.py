"""Run configuration loader for JSON and YAML files.

Provides functions to load and validate RunConfig settings from JSON or
YAML files, returning validated Pydantic models.
"""

import json
import logging
from pathlib import Path
from typing import Any

import yaml
from pydantic import ValidationError as PydanticValidationError

from .errors import ConfigError
from .models import RunConfig

logger = logging.getLogger(__name__)


def load_config(file_path: str | Path) -> RunConfig:
    """Load and validate a run configuration from a JSON or YAML file.

    Args:
        file_path: Path to config file (.json or .yaml/.yml)

    Returns:
        Validated RunConfig model

    Raises:
        ConfigError: If the file is missing, cannot be read or parsed, or fails validation
    """
    path = Path(file_path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")

    try:
        content = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Failed to read config file '{path}': {e}")

    suffix = path.suffix.lower()
    if suffix == ".json":
        try:
            data = json.loads(content)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Invalid JSON in '{path}': {e}")
    elif suffix in (".yaml", ".yml"):
        try:
            data = yaml.safe_load(content)
        except yaml.YAMLError as e:
            raise ConfigError(f"Invalid YAML in '{path}': {e}")
    else:
        raise ConfigError(f"Unsupported file format '{suffix}'. Use .json, .yaml, or .yml")

    config = _validate_config_data(data or {}, str(path))
    logger.info("loaded run config from %s", path)
    return config


def _validate_config_data(data: Any, source_name: str) -> RunConfig:
    """Validate parsed config data, listing every problem as ``  location: message``."""
    try:
        return RunConfig.model_validate(data)
    except PydanticValidationError as e:
        errors = []
        for err in e.errors():
            loc = ".".join(str(x) for x in err["loc"])
            errors.append(f"  {loc}: {err['msg']}")
        error_list = "\n".join(errors)
        raise ConfigError(f"Config validation failed in '{source_name}':\n{error_list}")


def config_from_dict(data: dict[str, Any]) -> RunConfig:
    """Create a validated RunConfig from a dictionary (programmatic API)."""
    return _validate_config_data(data, "<dict>")


def config_to_yaml(config: RunConfig) -> str:
    """Serialize a RunConfig to YAML that load_config reads back unchanged.

    Derived grid fields (beta, delta_frft) are omitted so edited a/n values
    stay consistent.
    """
    data = config.model_dump(mode="json", exclude_none=True)
    grid = data["grid"]
    if grid["gamma"] == grid["beta"]:
        del grid["gamma"]
    del grid["beta"], grid["delta_frft"]
    return yaml.safe_dump(data, sort_keys=False)
