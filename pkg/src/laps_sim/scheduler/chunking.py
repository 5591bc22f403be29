"""Fixed-size chunking of long prefills."""

from __future__ import annotations

from dataclasses import dataclass

from laps_sim.workload import Request
from .state import SchedConfig


@dataclass(frozen=True)
class Chunk:
    """Tokens ``(start, end]`` of one request, run over ``history`` cached tokens."""

    request_id: int
    index: int
    start: int
    end: int
    history: int
    last: bool

    @property
    def tokens(self) -> int:
        return self.end - self.start


def long_chunk_dispatch(r: Request, cfg: SchedConfig) -> list[Chunk]:
    """Split ``r`` into ``ceil(L / c_l)`` chunks executed in order."""
    chunks = []
    start = 0
    index = 0
    while start < r.new_tokens:
        end = min(start + cfg.c_l, r.new_tokens)
        chunks.append(
            Chunk(
                request_id=r.id,
                index=index,
                start=start,
                end=end,
                history=r.history_tokens + start,
                last=end == r.new_tokens,
            )
        )
        start = end
        index += 1
    return chunks
