"""Line-delimited JSON trace ingestion and export."""

from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from pathlib import Path
from typing import Any, Iterable

from laps_sim.errors import InvariantViolation, ParseError
from .schemas import Request

logger = logging.getLogger(__name__)

REQUIRED_FIELDS = ("session_id", "turn", "arrival_ms", "new_tokens")
OPTIONAL_INT_FIELDS = ("id", "gen_tokens", "history_tokens")


def _as_int(value: Any, name: str, line_number: int) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"field '{name}' must be a number", line_number)
    if not math.isfinite(value):
        raise ParseError(f"field '{name}' must be finite", line_number)
    if float(value) != int(value):
        raise ParseError(f"field '{name}' must be an integer", line_number)
    return int(value)


def _as_time(value: Any, name: str, line_number: int) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"field '{name}' must be a number", line_number)
    if not math.isfinite(value):
        raise ParseError(f"field '{name}' must be finite", line_number)
    return float(value)


def _parse_line(line: str, line_number: int) -> dict[str, Any]:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", line_number) from exc
    if not isinstance(raw, dict):
        raise ParseError("record must be a JSON object", line_number)
    for name in REQUIRED_FIELDS:
        if name not in raw:
            raise ParseError(f"missing field '{name}'", line_number)

    record: dict[str, Any] = {
        "line": line_number,
        "session_id": _as_int(raw["session_id"], "session_id", line_number),
        "turn": _as_int(raw["turn"], "turn", line_number),
        "arrival_time": _as_time(raw["arrival_ms"], "arrival_ms", line_number),
        "new_tokens": _as_int(raw["new_tokens"], "new_tokens", line_number),
    }
    for name in OPTIONAL_INT_FIELDS:
        value = raw.get(name)
        record[name] = None if value is None else _as_int(value, name, line_number)
    deadline = raw.get("deadline_ms")
    record["deadline"] = (
        None if deadline is None else _as_time(deadline, "deadline_ms", line_number)
    )
    return record


def _fill_history(records: list[dict[str, Any]]) -> None:
    sessions: dict[int, list[dict[str, Any]]] = defaultdict(list)
    for record in records:
        sessions[record["session_id"]].append(record)

    for session_id, turns in sessions.items():
        turns.sort(key=lambda r: r["turn"])
        history = 0
        previous: dict[str, Any] | None = None
        for record in turns:
            if previous is not None:
                if record["turn"] == previous["turn"]:
                    raise InvariantViolation(
                        f"session {session_id}: duplicate turn {record['turn']} "
                        f"(line {record['line']})"
                    )
                if record["arrival_time"] < previous["arrival_time"]:
                    raise InvariantViolation(
                        f"session {session_id}: turn {record['turn']} arrives before "
                        f"turn {previous['turn']} (line {record['line']})"
                    )
            if record["history_tokens"] is None:
                record["history_tokens"] = history
            history += record["new_tokens"] + (record["gen_tokens"] or 0)
            previous = record


def load_trace(path: Path | str) -> list[Request]:
    """Read a JSONL trace into requests sorted by arrival time."""
    records: list[dict[str, Any]] = []
    with Path(path).open("rb") as handle:
        for line_number, raw_line in enumerate(handle, start=1):
            try:
                line = raw_line.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise ParseError(f"invalid UTF-8 ({exc.reason})", line_number) from exc
            if not line.strip():
                continue
            records.append(_parse_line(line, line_number))

    _fill_history(records)
    records.sort(key=lambda r: (r["arrival_time"], r["session_id"], r["turn"]))

    requests: list[Request] = []
    seen_ids: set[int] = set()
    for index, record in enumerate(records):
        request_id = record["id"] if record["id"] is not None else index
        if request_id in seen_ids:
            raise InvariantViolation(
                f"duplicate request id {request_id} (line {record['line']})"
            )
        seen_ids.add(request_id)
        try:
            requests.append(
                Request(
                    id=request_id,
                    session_id=record["session_id"],
                    turn=record["turn"],
                    new_tokens=record["new_tokens"],
                    history_tokens=record["history_tokens"],
                    arrival_time=record["arrival_time"],
                    deadline=record["deadline"],
                    gen_tokens=record["gen_tokens"],
                )
            )
        except InvariantViolation as exc:
            raise InvariantViolation(f"line {record['line']}: {exc}") from exc

    logger.info("loaded %d requests from %s", len(requests), path)
    return requests


def save_trace(requests: Iterable[Request], path: Path | str) -> Path:
    """Write requests as one JSON object per line."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8") as handle:
        for request in requests:
            handle.write(request.to_json() + "\n")
    return target
