"""Discrete-event simulator of a length-aware prefill serving tier."""

from __future__ import annotations

from laps_sim.config import ExperimentConfig, load_config
from laps_sim.cost_model import CostParams, ExecOverheads, batch_service_time
from laps_sim.experiments import compare_policies, run_experiment, sweep
from laps_sim.metrics import MetricsReport, compute_report
from laps_sim.sim.engine import (
    DisaggMode,
    Policy,
    Router,
    SimConfig,
    SimResult,
    run,
)
from laps_sim.workload import Request

__version__ = "0.1.0"

__all__ = [
    "CostParams",
    "DisaggMode",
    "ExecOverheads",
    "ExperimentConfig",
    "MetricsReport",
    "Policy",
    "Request",
    "Router",
    "SimConfig",
    "SimResult",
    "batch_service_time",
    "compare_policies",
    "compute_report",
    "load_config",
    "run",
    "run_experiment",
    "sweep",
]
