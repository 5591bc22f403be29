"""Shared data contracts for prefill requests."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Any

from laps_sim.errors import InvariantViolation


class RequestClass(str, Enum):
    SHORT = "short"
    LONG = "long"


@dataclass(frozen=True)
class Request:
    """One prefill or re-prefill job."""

    id: int
    session_id: int
    turn: int
    new_tokens: int
    history_tokens: int
    arrival_time: float
    deadline: float | None = None
    gen_tokens: int | None = None

    def __post_init__(self) -> None:
        if self.new_tokens < 1:
            raise InvariantViolation(f"request {self.id}: new_tokens must be >= 1")
        if self.history_tokens < 0:
            raise InvariantViolation(f"request {self.id}: history_tokens must be >= 0")
        if self.turn < 1:
            raise InvariantViolation(f"request {self.id}: turn must be >= 1")
        if self.turn == 1 and self.history_tokens != 0:
            raise InvariantViolation(
                f"request {self.id}: first turn cannot carry history"
            )
        if self.deadline is not None and self.deadline <= self.arrival_time:
            raise InvariantViolation(
                f"request {self.id}: deadline must be after arrival"
            )

    def to_dict(self) -> dict[str, Any]:
        record: dict[str, Any] = {
            "id": self.id,
            "session_id": self.session_id,
            "turn": self.turn,
            "arrival_ms": _compact(self.arrival_time),
            "new_tokens": self.new_tokens,
            "history_tokens": self.history_tokens,
        }
        if self.gen_tokens is not None:
            record["gen_tokens"] = self.gen_tokens
        if self.deadline is not None:
            record["deadline_ms"] = _compact(self.deadline)
        return record

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


def _compact(value: float) -> int | float:
    return int(value) if float(value).is_integer() else value


def classify(r: Request, l_m_first: float, l_m_re: float) -> RequestClass:
    """Short iff ``L`` is at most the boundary that applies to the request's turn."""
    if l_m_first < 0 or l_m_re < 0:
        raise ValueError("classification boundaries must be >= 0")
    boundary = l_m_first if r.turn == 1 else l_m_re
    return RequestClass.SHORT if r.new_tokens <= boundary else RequestClass.LONG
