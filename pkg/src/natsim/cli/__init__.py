"""Configuration, export and the ``natsim`` command."""

from .config import ConfigError, RunConfig, config_to_dict, parse_config, parse_config_dict, serialize, with_overrides
from .export import FORMATS, export
from .filters import FilterSpec, lowpass
from .main import main

__all__ = [
    "ConfigError", "RunConfig", "config_to_dict", "parse_config", "parse_config_dict", "serialize",
    "with_overrides", "FORMATS", "export", "FilterSpec", "lowpass", "main",
]
