"""Experiment presets, run configs, trace export and the verify suite."""
from .config import ConfigError, RunConfig, load_config, parse_config, run_config
from .export import COLUMNS, export_trace, read_csv
from .presets import PRESETS, ExperimentPreset, get_preset, run_cell, run_preset
from .suite import SuiteOutcome, ZooEntry, default_zoo, verify_suite

__all__ = [
    "COLUMNS", "ConfigError", "ExperimentPreset", "PRESETS", "RunConfig", "SuiteOutcome",
    "ZooEntry", "default_zoo", "export_trace", "get_preset", "load_config", "parse_config",
    "read_csv", "run_cell", "run_config", "run_preset", "verify_suite",
]
