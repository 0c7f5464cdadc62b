"""Python front end for the hvsim scenario runner."""

from ._core import (
    Config,
    ConfigError,
    ScenarioKind,
    Technology,
    aggregate,
    default_config,
    heatmap,
    load_config,
    parse_config,
    run,
)

__all__ = [
    "Config",
    "ConfigError",
    "ScenarioKind",
    "Technology",
    "aggregate",
    "default_config",
    "heatmap",
    "load_config",
    "parse_config",
    "run",
]
