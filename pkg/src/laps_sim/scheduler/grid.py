"""Captured execution-shape grid and bucket selection."""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from typing import Sequence

from laps_sim.cost_model import BatchShape, KernelKind
from laps_sim.errors import ConfigError
from laps_sim.workload import Request

MB = 1024 * 1024

# Per-shape capture footprint for the model sizes we ship presets for.
MODEL_PRESETS: dict[str, int] = {
    "7b": 228 * MB,
    "14b": 240 * MB,
    "32b": 277 * MB,
}


@dataclass(frozen=True)
class GraphGrid:
    lengths: tuple[int, ...] = (8, 16, 32, 64, 128, 256)
    depths: tuple[int, ...] = (1, 2, 4, 8, 16, 32, 64)
    mem_per_graph: int = MODEL_PRESETS["7b"]
    mem_budget: int = 4096 * MB

    def __post_init__(self) -> None:
        for name in ("lengths", "depths"):
            values = getattr(self, name)
            if not values:
                raise ConfigError(f"grid {name} must not be empty")
            if any(b <= a for a, b in zip(values, values[1:])):
                raise ConfigError(f"grid {name} must be strictly increasing")
            if values[0] < 1:
                raise ConfigError(f"grid {name} must be >= 1")
        if self.mem_per_graph <= 0:
            raise ConfigError("mem_per_graph must be > 0")
        if self.mem_budget < 0:
            raise ConfigError("mem_budget must be >= 0")

    @classmethod
    def for_model(cls, preset: str, **overrides) -> "GraphGrid":
        try:
            mem = MODEL_PRESETS[preset.lower()]
        except KeyError as exc:
            raise ConfigError(
                f"unknown model preset '{preset}', "
                f"expected one of {sorted(MODEL_PRESETS)}"
            ) from exc
        return cls(mem_per_graph=mem, **overrides)

    @property
    def max_length(self) -> int:
        return self.lengths[-1]

    @property
    def max_depth(self) -> int:
        return self.depths[-1]

    @property
    def capturable(self) -> bool:
        return self.mem_per_graph <= self.mem_budget

    def next_depth(self, depth: int) -> int:
        """Smallest grid depth >= ``depth``, capped at the largest one."""
        index = bisect_left(self.depths, depth)
        return self.depths[min(index, len(self.depths) - 1)]


def bucket_of(L: int, grid: GraphGrid) -> int | None:
    """Smallest grid length that holds ``L`` tokens, or None past the grid."""
    if L < 1:
        raise ValueError(f"token length must be >= 1, got {L}")
    index = bisect_left(grid.lengths, L)
    if index == len(grid.lengths):
        return None
    return grid.lengths[index]


def nearest_graph(candidate: Sequence[Request], grid: GraphGrid) -> BatchShape | None:
    """Captured shape covering ``candidate`` with the least padding.

    Ties go to the smaller depth, then the smaller length.
    """
    if not candidate:
        raise ValueError("candidate batch is empty")
    if not grid.capturable:
        return None
    max_len = max(r.new_tokens for r in candidate)
    count = len(candidate)
    real = sum(r.new_tokens for r in candidate)

    best: tuple[int, int, int] | None = None
    for length in grid.lengths:
        if length < max_len:
            continue
        for depth in grid.depths:
            if depth < count:
                continue
            key = (length * depth - real, depth, length)
            if best is None or key < best:
                best = key
    if best is None:
        return None
    _, depth, length = best
    return BatchShape(l_pad=length, depth=depth, kind=KernelKind.GRAPH)


def standard_shape(candidate: Sequence[Request]) -> BatchShape:
    return BatchShape(
        l_pad=max(r.new_tokens for r in candidate),
        depth=len(candidate),
        kind=KernelKind.STANDARD,
    )


def shape_for(
    candidate: Sequence[Request], grid: GraphGrid, use_graphs: bool = True
) -> BatchShape:
    shape = nearest_graph(candidate, grid) if use_graphs else None
    return shape or standard_shape(candidate)
