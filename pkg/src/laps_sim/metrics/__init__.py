"""Metrics computed from simulation event logs."""

from .exporters import sweep_frame, write_metrics, write_sweep
from .report import (
    BatchStats,
    ClassMetrics,
    MetricsReport,
    compute_report,
    percentile,
    slo_violation_rate,
)

__all__ = [
    "BatchStats",
    "ClassMetrics",
    "MetricsReport",
    "compute_report",
    "percentile",
    "slo_violation_rate",
    "sweep_frame",
    "write_metrics",
    "write_sweep",
]
