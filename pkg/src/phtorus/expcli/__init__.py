"""Config-driven experiment runner."""

from .cli import emit_default_config, list_experiments, main, run
from .config import ConfigError, ExperimentConfig, load, parse, validate

__all__ = ["ConfigError", "ExperimentConfig", "emit_default_config", "list_experiments", "load",
           "main", "parse", "run", "validate"]
