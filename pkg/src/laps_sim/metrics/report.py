"""Latency and batching metrics derived from an event log."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from laps_sim.errors import EmptySamples
from laps_sim.sim.events import EventLog, RecordKind

CLASSES = ("short", "long", "all")


def percentile(samples: Sequence[float], q: float) -> float:
    """Nearest-rank percentile: the value at rank ``ceil(q/100 * n)``."""
    if len(samples) == 0:
        raise EmptySamples("percentile of an empty sample")
    if not 0 < q <= 100:
        raise ValueError(f"percentile rank must be in (0, 100], got {q}")
    ordered = np.sort(np.asarray(samples, dtype=float))
    rank = max(1, math.ceil(q / 100 * len(ordered)))
    return float(ordered[rank - 1])


def slo_violation_rate(ttfts: Sequence[float], slo: float) -> float:
    if len(ttfts) == 0:
        raise EmptySamples("violation rate of an empty sample")
    values = np.asarray(ttfts, dtype=float)
    return float(np.count_nonzero(values > slo) / len(values))


@dataclass(frozen=True)
class ClassMetrics:
    count: int = 0
    ttft_mean: float = 0.0
    ttft_p50: float = 0.0
    ttft_p90: float = 0.0
    ttft_p99: float = 0.0
    rps: float = 0.0
    slo_violation_rate: float = 0.0

    @classmethod
    def from_ttfts(
        cls, ttfts: Sequence[float], slo: float, interval_ms: float
    ) -> "ClassMetrics":
        if len(ttfts) == 0:
            return cls()
        return cls(
            count=len(ttfts),
            ttft_mean=float(np.mean(ttfts)),
            ttft_p50=percentile(ttfts, 50),
            ttft_p90=percentile(ttfts, 90),
            ttft_p99=percentile(ttfts, 99),
            rps=len(ttfts) / (interval_ms / 1000.0) if interval_ms > 0 else 0.0,
            slo_violation_rate=slo_violation_rate(ttfts, slo),
        )


@dataclass(frozen=True)
class BatchStats:
    batches: int = 0
    short_batches: int = 0
    mean_depth: float = 0.0
    graph_hit_rate: float = 0.0
    padding_overhead: float = 0.0


@dataclass(frozen=True)
class MetricsReport:
    arrivals: int
    completions: int
    short: ClassMetrics
    long: ClassMetrics
    overall: ClassMetrics
    batches: BatchStats
    migrations: int
    active_ms: float

    def by_class(self, name: str) -> ClassMetrics:
        return {"short": self.short, "long": self.long, "all": self.overall}[name]

    def to_dict(self) -> dict[str, Any]:
        return {
            "arrivals": self.arrivals,
            "completions": self.completions,
            "active_ms": self.active_ms,
            "migrations": self.migrations,
            "classes": {name: asdict(self.by_class(name)) for name in CLASSES},
            "batches": asdict(self.batches),
        }

    def flat(self) -> dict[str, Any]:
        """One-level mapping used for sweep rows."""
        row: dict[str, Any] = {
            "arrivals": self.arrivals,
            "completions": self.completions,
            "active_ms": self.active_ms,
            "migrations": self.migrations,
        }
        for name in CLASSES:
            for key, value in asdict(self.by_class(name)).items():
                row[f"{name}_{key}"] = value
        for key, value in asdict(self.batches).items():
            row[f"batch_{key}"] = value
        return row


def _batch_stats(log: EventLog) -> BatchStats:
    dispatches = log.of_kind(RecordKind.DISPATCH)
    if not dispatches:
        return BatchStats()
    short = [d for d in dispatches if d.klass == "short"]
    padded = sum((d.l_pad or 0) * (d.depth or 0) for d in dispatches)
    real = sum(d.tokens or 0 for d in dispatches)
    return BatchStats(
        batches=len(dispatches),
        short_batches=len(short),
        mean_depth=float(np.mean([len(d.request_ids) for d in dispatches])),
        graph_hit_rate=(
            sum(1 for d in short if d.kernel == "graph") / len(short) if short else 0.0
        ),
        padding_overhead=padded / real - 1.0 if real else 0.0,
    )


def compute_report(log: EventLog | Iterable, slo: float) -> MetricsReport:
    """Recompute every metric from ``log`` alone."""
    if not isinstance(log, EventLog):
        log = EventLog.from_records(log)

    arrival_at: dict[int, float] = {}
    klass_of: dict[int, str] = {}
    for record in log.of_kind(RecordKind.ARRIVAL):
        (request_id,) = record.request_ids
        arrival_at[request_id] = record.time_ms
        klass_of[request_id] = record.klass or "short"

    ttfts: dict[str, list[float]] = {name: [] for name in CLASSES}
    last_completion = None
    for record in log.of_kind(RecordKind.COMPLETE):
        for request_id in record.finished:
            ttft = record.time_ms - arrival_at[request_id]
            ttfts[klass_of[request_id]].append(ttft)
            ttfts["all"].append(ttft)
            last_completion = record.time_ms

    first_arrival = min(arrival_at.values()) if arrival_at else 0.0
    active = 0.0 if last_completion is None else last_completion - first_arrival
    per_class = {
        name: ClassMetrics.from_ttfts(ttfts[name], slo, active) for name in CLASSES
    }
    return MetricsReport(
        arrivals=len(arrival_at),
        completions=len(ttfts["all"]),
        short=per_class["short"],
        long=per_class["long"],
        overall=per_class["all"],
        batches=_batch_stats(log),
        migrations=len(log.of_kind(RecordKind.MIGRATE)),
        active_ms=active,
    )
