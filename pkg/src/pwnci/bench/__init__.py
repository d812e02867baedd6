"""Monte Carlo coverage harness and command-line interface."""

from .config import ExperimentConfig, default_config, load_config
from .report import CoverageSummary, aggregate, coverage_csv, coverage_table, emit, five_number
from .runner import ReplicationRecord, run_experiment, run_replication, stream

__all__ = [
    "CoverageSummary",
    "ExperimentConfig",
    "ReplicationRecord",
    "aggregate",
    "coverage_csv",
    "coverage_table",
    "default_config",
    "emit",
    "five_number",
    "load_config",
    "run_experiment",
    "run_replication",
    "stream",
]
