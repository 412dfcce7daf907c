"""Experiment configuration, seed replication, result tables and plot data."""

from .config import SCHEMA, TABLE_METRICS, ConfigError, ExperimentConfig, from_dict, load_config
from .plots import emit_plot_data
from .runner import ResultTable, read_csv, run_cell, run_experiment, write_csv

__all__ = [
    "SCHEMA",
    "TABLE_METRICS",
    "ConfigError",
    "ExperimentConfig",
    "ResultTable",
    "emit_plot_data",
    "from_dict",
    "load_config",
    "read_csv",
    "run_cell",
    "run_experiment",
    "write_csv",
]
