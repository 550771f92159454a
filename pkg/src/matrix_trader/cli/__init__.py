"""Command-line driver and experiment configuration."""

from matrix_trader.cli.config import (
    ConfigError,
    DatasetSpecConfig,
    ExperimentConfig,
    PolicySpecConfig,
    RunConfig,
    build_policy_spec,
    load_config,
    write_resolved,
)
from matrix_trader.cli.main import main

__all__ = [
    "ConfigError",
    "DatasetSpecConfig",
    "ExperimentConfig",
    "PolicySpecConfig",
    "RunConfig",
    "build_policy_spec",
    "load_config",
    "main",
    "write_resolved",
]
