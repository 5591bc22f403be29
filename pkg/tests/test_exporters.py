"""Unit tests for metrics and sweep writers."""

import json

import pandas as pd

from laps_sim.metrics import compute_report, sweep_frame, write_metrics, write_sweep
from laps_sim.sim.events import EventLog, RecordKind


def small_report():
    log = EventLog()
    log.append(0.0, RecordKind.ARRIVAL, request_ids=(0,), klass="long")
    log.append(50.0, RecordKind.COMPLETE, instance=1, request_ids=(0,), finished=(0,))
    return compute_report(log, slo=400.0)


class TestWriteMetrics:
    def test_json_layout(self, tmp_path):
        path = write_metrics(small_report(), tmp_path / "out" / "metrics.json")
        obj = json.loads(path.read_text())
        assert list(obj) == [
            "arrivals",
            "completions",
            "active_ms",
            "migrations",
            "classes",
            "batches",
        ]
        assert obj["classes"]["long"]["ttft_mean"] == 50.0
        assert obj["classes"]["short"]["count"] == 0


class TestSweep:
    def test_frame_sorted_with_param_first(self):
        rows = [{"x": 1.0, "lam": 4}, {"x": 2.0, "lam": 1}]
        frame = sweep_frame(rows, "lam")
        assert list(frame.columns) == ["lam", "x"]
        assert list(frame["lam"]) == [1, 4]

    def test_empty_rows(self):
        assert list(sweep_frame([], "lam").columns) == ["lam"]

    def test_csv(self, tmp_path):
        rows = [{"lam": 0.1, **small_report().flat()}]
        path = write_sweep(rows, "lam", tmp_path / "sweep.csv")
        frame = pd.read_csv(path)
        assert frame.loc[0, "lam"] == 0.1
        assert frame.loc[0, "long_ttft_mean"] == 50.0
