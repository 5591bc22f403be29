"""Simulation events and the structured event log."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Iterator

import pandas as pd

from laps_sim.errors import ParseError


class EventKind(str, Enum):
    ARRIVAL = "arrival"
    WINDOW_EXPIRY = "window_expiry"
    BATCH_COMPLETE = "batch_complete"
    CONTROLLER_TICK = "controller_tick"


@dataclass(order=True)
class Event:
    """Queue entry; ordering is by ``(time, seq)`` only."""

    time: float
    seq: int
    kind: EventKind = field(compare=False)
    payload: Any = field(default=None, compare=False)


class RecordKind(str, Enum):
    ARRIVAL = "arrival"
    DISPATCH = "dispatch"
    COMPLETE = "complete"
    MIGRATE = "migrate"


@dataclass(frozen=True)
class EventRecord:
    """One line of the event log. Field order is the serialized order."""

    time_ms: float
    seq: int
    kind: str
    instance: int | None = None
    request_ids: tuple[int, ...] = ()
    reason: str | None = None
    klass: str | None = None
    l_pad: int | None = None
    depth: int | None = None
    kernel: str | None = None
    tokens: int | None = None
    deadline_ms: float | None = None
    finished: tuple[int, ...] = ()

    def to_json(self) -> str:
        record = asdict(self)
        record["request_ids"] = list(self.request_ids)
        record["finished"] = list(self.finished)
        return json.dumps(record, separators=(",", ":"))

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "EventRecord":
        known = {f.name for f in fields(cls)}
        values = {k: v for k, v in raw.items() if k in known}
        values["request_ids"] = tuple(values.get("request_ids") or ())
        values["finished"] = tuple(values.get("finished") or ())
        return cls(**values)


class EventLog:
    """Append-only record of everything the simulator did."""

    def __init__(self) -> None:
        self._records: list[EventRecord] = []

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[EventRecord]:
        return iter(self._records)

    @classmethod
    def from_records(cls, records: Iterable[EventRecord]) -> "EventLog":
        log = cls()
        log._records.extend(records)
        return log

    def append(self, time_ms: float, kind: RecordKind, **values: Any) -> EventRecord:
        record = EventRecord(
            time_ms=time_ms, seq=len(self._records), kind=kind.value, **values
        )
        self._records.append(record)
        return record

    def of_kind(self, kind: RecordKind) -> list[EventRecord]:
        return [r for r in self._records if r.kind == kind.value]

    def to_jsonl(self) -> str:
        return "".join(record.to_json() + "\n" for record in self._records)

    def save(self, path: Path | str) -> Path:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(self.to_jsonl(), encoding="utf-8")
        return target

    @classmethod
    def load(cls, path: Path | str) -> "EventLog":
        log = cls()
        with Path(path).open("r", encoding="utf-8") as handle:
            for line_number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    raw = json.loads(line)
                    log._records.append(EventRecord.from_dict(raw))
                except (json.JSONDecodeError, TypeError) as exc:
                    raise ParseError(f"bad event record ({exc})", line_number) from exc
        return log

    def to_frame(self) -> pd.DataFrame:
        columns = [f.name for f in fields(EventRecord)]
        return pd.DataFrame([asdict(r) for r in self._records], columns=columns)
