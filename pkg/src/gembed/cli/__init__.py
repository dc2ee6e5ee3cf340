"""
Command-line surface: run configuration, subcommands and argument parsing.
"""

from .commands import RunManifest, cmd_eval, cmd_preprocess, cmd_simulate, cmd_train, simulate_rows
from .config import RunConfig, deep_merge, list_presets, load_run_config, parse_overrides
from .main import build_parser, main

__all__ = [
    "RunConfig",
    "RunManifest",
    "build_parser",
    "cmd_eval",
    "cmd_preprocess",
    "cmd_simulate",
    "cmd_train",
    "deep_merge",
    "list_presets",
    "load_run_config",
    "main",
    "parse_overrides",
    "simulate_rows",
]
