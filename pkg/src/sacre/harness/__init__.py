"""Experiment driver: replications, statistics, reports and the CLI."""

from .report import read_report, reaggregate, write_report
from .runner import (GRACE_ITERATIONS, Adaptation, Clock, ReplicationResult, agreement,
                     run_replication, run_scenario)
from .stats import (MetricsReport, ScenarioMetrics, UndefinedCorrelation, aggregate, mean_sd,
                    ppmcc, sample_size)

__all__ = [
    "Adaptation", "Clock", "GRACE_ITERATIONS", "MetricsReport", "ReplicationResult",
    "ScenarioMetrics", "UndefinedCorrelation", "aggregate", "agreement", "mean_sd", "ppmcc",
    "read_report", "reaggregate", "run_replication", "run_scenario", "sample_size",
    "write_report",
]
