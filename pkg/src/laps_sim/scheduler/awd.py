"""Adaptive wait/depth batching for the short-prefill queue."""

from __future__ import annotations

import logging
from dataclasses import replace

from laps_sim.workload import Request
from .admission import group_bucket_first
from .grid import GraphGrid, shape_for
from .queues import TIME_EPS, BatchPlan, DispatchReason, RequestQueue
from .state import AWDState, SchedConfig, SchedMode
from .windows import combined_window, graph_window

logger = logging.getLogger(__name__)


def begin_round(
    st: AWDState, queue: RequestQueue, now: float, grid: GraphGrid, cfg: SchedConfig
) -> AWDState:
    """Open an accumulation round if none is open and work is queued.

    With depth recovery on, a backlog larger than ``D`` raises ``D`` to the
    smallest captured depth that covers it.
    """
    if st.round_start is not None or not queue:
        return st
    depth = st.d
    if cfg.depth_recovery and len(queue) > depth:
        depth = max(depth, grid.next_depth(len(queue)))
    return replace(st, round_start=now, d=depth)


def _slack_set(queue: RequestQueue, members: list[Request]) -> list[Request]:
    ids = {r.id for r in members}
    group = list(members)
    for request in queue:
        if request.id not in ids:
            group.append(request)
            break
    return group


def _min_slack(group: list[Request], now: float, s_hat: float) -> float | None:
    slacks = [r.deadline - now - s_hat for r in group if r.deadline is not None]
    return min(slacks) if slacks else None


def window_deadline(
    st: AWDState, queue: RequestQueue, now: float, cfg: SchedConfig, depth: int
) -> float:
    assert st.round_start is not None
    window = st.w
    if cfg.mode == SchedMode.SLA:
        window = min(window, combined_window(queue, now, st, cfg, current_depth=depth))
    return st.round_start + window


def _dispatch_reason(
    st: AWDState,
    queue: RequestQueue,
    members: list[Request],
    now: float,
    cfg: SchedConfig,
) -> DispatchReason | None:
    if len(members) >= st.d:
        return DispatchReason.DEPTH_REACHED
    if cfg.mode == SchedMode.SLA:
        slack = _min_slack(_slack_set(queue, members), now, st.s_hat)
        if slack is not None and slack <= cfg.sigma + TIME_EPS:
            return DispatchReason.SLA_BREAK
    if queue.hol_due(now, cfg.t_max):
        return DispatchReason.HOL_CAP
    if now >= window_deadline(st, queue, now, cfg, len(members)) - TIME_EPS:
        return DispatchReason.WINDOW_EXPIRED
    return None


def after_dispatch(
    st: AWDState, queue: RequestQueue, dispatched: int, now: float, cfg: SchedConfig
) -> AWDState:
    """Close the round: refresh the arrival-rate estimate and apply W/D updates.

    ``queue`` is the queue as it stood before the batch was removed.
    """
    start = now if st.round_start is None else st.round_start
    fill_time = now - start

    r_hat = st.r_hat
    if fill_time > 0:
        arrived = sum(1 for r in queue if r.arrival_time > start)
        r_hat = (1 - cfg.ewma) * r_hat + cfg.ewma * arrived / fill_time

    w, d = st.w, st.d
    if dispatched >= st.d:
        w = cfg.clip(fill_time)
    else:
        d = max(1, dispatched)
    return replace(st, w=w, d=d, r_hat=r_hat, round_start=None)


def observe_service(
    st: AWDState, service_time: float, depth: int, cfg: SchedConfig
) -> AWDState:
    per_request = service_time / max(depth, 1)
    return replace(st, s_hat=(1 - cfg.ewma) * st.s_hat + cfg.ewma * per_request)


def awd_step(
    st: AWDState,
    queue: RequestQueue,
    now: float,
    grid: GraphGrid,
    cfg: SchedConfig,
    use_graphs: bool = True,
) -> tuple[BatchPlan | None, AWDState]:
    """One scheduling decision for an idle instance fed by ``queue``."""
    if not queue:
        return None, st
    st = begin_round(st, queue, now, grid, cfg)
    members = group_bucket_first(queue, grid, st.d, cfg.max_batch_tokens)
    reason = _dispatch_reason(st, queue, members, now, cfg)
    if reason is None:
        return None, st

    plan = BatchPlan(
        requests=tuple(members),
        shape=shape_for(members, grid, use_graphs),
        dispatch_time=now,
        reason=reason,
    )
    new_state = after_dispatch(st, queue, len(members), now, cfg)
    logger.debug(
        "awd dispatch %d requests (%s) W=%.3f D=%d -> W=%.3f D=%d",
        len(members),
        reason.value,
        st.w,
        st.d,
        new_state.w,
        new_state.d,
    )
    return plan, new_state


def awd_wakeup(
    st: AWDState, queue: RequestQueue, now: float, grid: GraphGrid, cfg: SchedConfig
) -> float | None:
    """Earliest time a waiting round could dispatch with no further arrivals."""
    head = queue.head()
    if head is None:
        return None
    st = begin_round(st, queue, now, grid, cfg)
    members = group_bucket_first(queue, grid, st.d, cfg.max_batch_tokens)

    assert st.round_start is not None
    start = st.round_start

    times = [head.arrival_time + cfg.t_max, start + st.w]
    if cfg.mode == SchedMode.SLA:
        times.append(start + cfg.clip(graph_window(st, len(members), cfg)))
        pending = [r.deadline for r in queue if r.deadline is not None]
        if pending:
            # The SLA window shrinks as the clock advances; solve for the
            # instant the elapsed round time catches up with it.
            caught_up = (start + min(pending) - st.s_hat - cfg.delta) / 2
            times.append(max(start + cfg.w_min, min(start + cfg.w_max, caught_up)))
        group = _slack_set(queue, members)
        deadlines = [r.deadline for r in group if r.deadline is not None]
        if deadlines:
            times.append(min(deadlines) - st.s_hat - cfg.sigma)
    return max(now, min(times))
