"""Experiment harness: configuration, replica experiments, reports, plots and the CLI."""
from __future__ import annotations

from .config import ExperimentConfig, load_config, parse_config_text
from .report import SummaryReport

__all__ = ["ExperimentConfig", "SummaryReport", "load_config", "parse_config_text"]
