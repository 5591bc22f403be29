"""Writers for run metrics and sweep tables."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Sequence

import pandas as pd

from .report import MetricsReport


def write_metrics(report: MetricsReport, path: Path | str) -> Path:
    """Write ``metrics.json`` with a fixed key order."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    return target


def sweep_frame(rows: Sequence[dict[str, Any]], param: str) -> pd.DataFrame:
    """One row per sweep point, sorted by the swept value, ``param`` first."""
    frame = pd.DataFrame(list(rows))
    if frame.empty:
        return pd.DataFrame(columns=[param])
    columns = [param] + [c for c in frame.columns if c != param]
    return frame[columns].sort_values(param, kind="mergesort").reset_index(drop=True)


def write_sweep(rows: Sequence[dict[str, Any]], param: str, path: Path | str) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    sweep_frame(rows, param).to_csv(target, index=False, lineterminator="\n")
    return target
