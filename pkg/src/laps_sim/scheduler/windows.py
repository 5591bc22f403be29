"""SLA-constrained waiting windows for short-prefill batching."""

from __future__ import annotations

from typing import Iterable

from laps_sim.workload import Request
from .state import AWDState, SchedConfig


def min_time_to_deadline(queue: Iterable[Request], now: float) -> float | None:
    remaining = [r.deadline - now for r in queue if r.deadline is not None]
    return min(remaining) if remaining else None


def sla_window(
    queue: Iterable[Request], now: float, st: AWDState, cfg: SchedConfig
) -> float:
    """Last safe wait before the tightest pending deadline is at risk.

    Requests without a deadline do not constrain the window; if nothing does,
    the window is ``w_max``.
    """
    remaining = min_time_to_deadline(queue, now)
    if remaining is None:
        return cfg.w_max
    return max(0.0, remaining - st.s_hat - cfg.delta)


def graph_window(st: AWDState, current_depth: int, cfg: SchedConfig) -> float:
    """Expected time for arrivals to fill the batch up to the target depth."""
    missing = max(0, st.d - current_depth)
    return missing / max(st.r_hat, cfg.epsilon)


def combined_window(
    queue: Iterable[Request],
    now: float,
    st: AWDState,
    cfg: SchedConfig,
    current_depth: int | None = None,
) -> float:
    pending = list(queue)
    depth = len(pending) if current_depth is None else current_depth
    window = min(sla_window(pending, now, st, cfg), graph_window(st, depth, cfg))
    return cfg.clip(window)
