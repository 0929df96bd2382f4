"""Experiment harness: configs, replications, regret ledger and result files."""

from pairbandit.harness.config import CellSpec, ExperimentConfig, load_config, parse_config
from pairbandit.harness.ledger import PenaltyFunction, RegretLedger
from pairbandit.harness.runner import run_experiment, run_replication

__all__ = [
    "CellSpec",
    "ExperimentConfig",
    "PenaltyFunction",
    "RegretLedger",
    "load_config",
    "parse_config",
    "run_experiment",
    "run_replication",
]
