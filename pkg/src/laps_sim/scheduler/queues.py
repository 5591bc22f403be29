"""FIFO request queues and the batch plans drawn from them."""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator

from laps_sim.cost_model import BatchShape
from laps_sim.errors import ShapeMismatch
from laps_sim.workload import Request

# Clock comparisons tolerate float noise from recomputed deadlines.
TIME_EPS = 1e-9


class DispatchReason(str, Enum):
    DEPTH_REACHED = "depth_reached"
    WINDOW_EXPIRED = "window_expired"
    SLA_BREAK = "sla_break"
    HOL_CAP = "hol_cap"
    TOKEN_MAX = "token_max"
    FCFS = "fcfs"
    CHUNK = "chunk"


@dataclass(frozen=True)
class BatchPlan:
    requests: tuple[Request, ...]
    shape: BatchShape
    dispatch_time: float
    reason: DispatchReason

    def __post_init__(self) -> None:
        if not self.requests:
            raise ShapeMismatch("batch plan has no members")
        if self.shape.depth < len(self.requests):
            raise ShapeMismatch(
                f"shape depth {self.shape.depth} < {len(self.requests)} members"
            )
        if self.shape.l_pad < max(r.new_tokens for r in self.requests):
            raise ShapeMismatch(f"l_pad {self.shape.l_pad} does not cover members")

    @property
    def members(self) -> tuple[int, ...]:
        return tuple(r.id for r in self.requests)

    @property
    def tokens(self) -> int:
        return sum(r.new_tokens for r in self.requests)

    def service_members(self) -> list[tuple[float, float]]:
        """``(L, H)`` per slot, with empty graph slots as ``(0, 0)``."""
        members = [
            (float(r.new_tokens), float(r.history_tokens)) for r in self.requests
        ]
        members.extend([(0.0, 0.0)] * (self.shape.depth - len(self.requests)))
        return members


class RequestQueue:
    """Arrival-ordered queue with removal by id."""

    def __init__(self, name: str = "") -> None:
        self.name = name
        self._items: OrderedDict[int, Request] = OrderedDict()

    def __len__(self) -> int:
        return len(self._items)

    def __bool__(self) -> bool:
        return bool(self._items)

    def __iter__(self) -> Iterator[Request]:
        return iter(self._items.values())

    def __contains__(self, request_id: object) -> bool:
        return request_id in self._items

    def push(self, request: Request) -> None:
        self._items[request.id] = request

    def extend(self, requests: Iterable[Request]) -> None:
        for request in requests:
            self.push(request)

    def head(self) -> Request | None:
        return next(iter(self._items.values()), None)

    def remove(self, request_ids: Iterable[int]) -> list[Request]:
        return [self._items.pop(request_id) for request_id in request_ids]

    def total_tokens(self) -> int:
        return sum(r.new_tokens for r in self._items.values())

    def hol_wait(self, now: float) -> float:
        head = self.head()
        return 0.0 if head is None else now - head.arrival_time

    def hol_due(self, now: float, t_max: float) -> bool:
        """True once the head has waited ``t_max``, within float tolerance."""
        head = self.head()
        return head is not None and now >= head.arrival_time + t_max - TIME_EPS
