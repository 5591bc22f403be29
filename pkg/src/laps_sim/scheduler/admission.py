"""Batch formation: bucket-first grouping, token-max and FCFS admission."""

from __future__ import annotations

from collections import defaultdict

from laps_sim.workload import Request
from .grid import GraphGrid, bucket_of, shape_for, standard_shape
from .queues import BatchPlan, DispatchReason, RequestQueue
from .state import SchedConfig


def group_bucket_first(
    queue: RequestQueue, grid: GraphGrid, limit: int, max_tokens: int
) -> list[Request]:
    """Oldest requests that can share one padded shape with the queue head.

    The head's bucket is drained first, then larger buckets in ascending
    order. Requests past the grid only group with each other. ``max_tokens``
    bounds the padded size of the batch.
    """
    head = queue.head()
    if head is None or limit < 1:
        return []
    head_bucket = bucket_of(head.new_tokens, grid)

    if head_bucket is None:
        members: list[Request] = []
        l_pad = 0
        for request in queue:
            if bucket_of(request.new_tokens, grid) is not None:
                continue
            width = max(l_pad, request.new_tokens)
            if members and width * (len(members) + 1) > max_tokens:
                break
            members.append(request)
            l_pad = width
            if len(members) >= limit:
                break
        return members

    by_bucket: dict[int, list[Request]] = defaultdict(list)
    for request in queue:
        bucket = bucket_of(request.new_tokens, grid)
        if bucket is not None and bucket >= head_bucket:
            by_bucket[bucket].append(request)

    members = []
    for bucket in sorted(by_bucket):
        for request in by_bucket[bucket]:
            if len(members) >= limit:
                return members
            if members and bucket * (len(members) + 1) > max_tokens:
                return members
            members.append(request)
    return members


def token_max_admit(
    queue: RequestQueue, cfg: SchedConfig, grid: GraphGrid, now: float
) -> BatchPlan | None:
    """Deadline-free admission: launch once the batch carries ``m_s`` tokens.

    A head request waiting ``t_max`` or longer forces a launch regardless.
    """
    members = group_bucket_first(queue, grid, grid.max_depth, cfg.max_batch_tokens)
    if not members:
        return None
    if sum(r.new_tokens for r in members) >= cfg.m_s:
        reason = DispatchReason.TOKEN_MAX
    elif queue.hol_due(now, cfg.t_max):
        reason = DispatchReason.HOL_CAP
    else:
        return None
    return BatchPlan(
        requests=tuple(members),
        shape=shape_for(members, grid),
        dispatch_time=now,
        reason=reason,
    )


def fcfs_admit(queue: RequestQueue, cfg: SchedConfig, now: float) -> BatchPlan | None:
    """Admit in arrival order until the token budget or batch cap is reached."""
    members: list[Request] = []
    tokens = 0
    for request in queue:
        if len(members) >= cfg.fcfs_max_batch:
            break
        if members and tokens + request.new_tokens > cfg.fcfs_token_budget:
            break
        members.append(request)
        tokens += request.new_tokens
    if not members:
        return None
    return BatchPlan(
        requests=tuple(members),
        shape=standard_shape(members),
        dispatch_time=now,
        reason=DispatchReason.FCFS,
    )
