"""Reproducible benchmark harness: configs, runners, metrics, reports."""

from .config import KINDS, ExperimentConfig, GridPoint, parse_config
from .experiments import RUNNERS, run_experiment
from .metrics import (METRIC_COLUMNS, METRIC_NAMES, MetricRecord,
                      MetricWriter, read_metrics, ser_record,
                      wilson_interval)
from .plots import emit_plots
from .report import DEFAULT_BASELINES, compare_report, write_report

__all__ = [
    "KINDS", "ExperimentConfig", "GridPoint", "parse_config",
    "RUNNERS", "run_experiment",
    "METRIC_COLUMNS", "METRIC_NAMES", "MetricRecord", "MetricWriter",
    "read_metrics", "ser_record", "wilson_interval",
    "emit_plots",
    "DEFAULT_BASELINES", "compare_report", "write_report",
]
