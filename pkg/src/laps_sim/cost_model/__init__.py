"""Analytical prefill cost model."""

from .fitting import LatencySample, fit_params, generate_samples, load_samples
from .latency import (
    BatchShape,
    CostParams,
    ExecOverheads,
    KernelKind,
    batch_service_time,
    compute_latency,
    prefill_boundary,
    reprefill_boundary,
)
from .roofline import Boundness, RooflineParams, roofline_classify, roofline_crossover

__all__ = [
    "BatchShape",
    "Boundness",
    "CostParams",
    "ExecOverheads",
    "KernelKind",
    "LatencySample",
    "RooflineParams",
    "batch_service_time",
    "compute_latency",
    "fit_params",
    "generate_samples",
    "load_samples",
    "prefill_boundary",
    "reprefill_boundary",
    "roofline_classify",
    "roofline_crossover",
]
