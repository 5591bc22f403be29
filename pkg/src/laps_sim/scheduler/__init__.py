"""Short/long prefill scheduling: queues, graph grid, windows and batching."""

from .admission import fcfs_admit, group_bucket_first, token_max_admit
from .awd import awd_step, awd_wakeup, observe_service
from .chunking import Chunk, long_chunk_dispatch
from .grid import MODEL_PRESETS, GraphGrid, bucket_of, nearest_graph, shape_for
from .queues import BatchPlan, DispatchReason, RequestQueue
from .state import AWDState, SchedConfig, SchedMode
from .windows import combined_window, graph_window, sla_window

__all__ = [
    "AWDState",
    "BatchPlan",
    "Chunk",
    "DispatchReason",
    "GraphGrid",
    "MODEL_PRESETS",
    "RequestQueue",
    "SchedConfig",
    "SchedMode",
    "awd_step",
    "awd_wakeup",
    "bucket_of",
    "combined_window",
    "fcfs_admit",
    "graph_window",
    "group_bucket_first",
    "long_chunk_dispatch",
    "nearest_graph",
    "observe_service",
    "shape_for",
    "sla_window",
    "token_max_admit",
]
