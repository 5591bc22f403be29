"""Request streams: trace files and synthetic generators."""

from .schemas import Request, RequestClass, classify
from .synth import (
    ClosedLoopConfig,
    ClosedLoopSource,
    LengthDist,
    SynthConfig,
    synth_stream,
)
from .trace import load_trace, save_trace

__all__ = [
    "ClosedLoopConfig",
    "ClosedLoopSource",
    "LengthDist",
    "Request",
    "RequestClass",
    "SynthConfig",
    "classify",
    "load_trace",
    "save_trace",
    "synth_stream",
]
