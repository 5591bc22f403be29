"""Seeded synthetic request streams.

Two sources are provided: an open-loop Poisson stream of multi-turn sessions
and a closed-loop set of clients that resubmit after each completion.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from laps_sim.errors import InvalidConfig
from .schemas import Request

DEFAULT_MAX_CONTEXT = 32768


@dataclass(frozen=True)
class LengthDist:
    """Bounded discrete distribution over token counts."""

    values: tuple[int, ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not self.values:
            raise InvalidConfig("length distribution has empty support")
        if min(self.values) < 1:
            raise InvalidConfig("length distribution support must be >= 1")
        if self.weights is not None:
            if len(self.weights) != len(self.values):
                raise InvalidConfig("length weights must match values")
            if min(self.weights) < 0 or sum(self.weights) <= 0:
                raise InvalidConfig("length weights must be nonnegative, not all 0")

    @classmethod
    def uniform(cls, low: int, high: int) -> "LengthDist":
        if high < low:
            raise InvalidConfig(f"empty uniform range [{low}, {high}]")
        return cls(values=tuple(range(low, high + 1)))

    @classmethod
    def fixed(cls, value: int) -> "LengthDist":
        return cls(values=(value,))

    @classmethod
    def parse(cls, text: str) -> "LengthDist":
        """Parse ``uniform:LO-HI``, ``fixed:N`` or ``choice:A,B,C``."""
        kind, _, body = text.strip().partition(":")
        try:
            if kind == "uniform":
                low, _, high = body.partition("-")
                return cls.uniform(int(low), int(high))
            if kind == "fixed":
                return cls.fixed(int(body))
            if kind == "choice":
                return cls(values=tuple(int(v) for v in body.split(",") if v.strip()))
        except ValueError as exc:
            raise InvalidConfig(f"bad length distribution '{text}'") from exc
        raise InvalidConfig(f"unknown length distribution '{text}'")

    def __str__(self) -> str:
        if len(self.values) == 1:
            return f"fixed:{self.values[0]}"
        low, high = self.values[0], self.values[-1]
        if self.weights is None and self.values == tuple(range(low, high + 1)):
            return f"uniform:{low}-{high}"
        return "choice:" + ",".join(str(v) for v in self.values)

    @property
    def max_value(self) -> int:
        return max(self.values)

    def sample(self, rng: np.random.Generator) -> int:
        if len(self.values) == 1:
            return self.values[0]
        if self.weights is None:
            return int(self.values[int(rng.integers(len(self.values)))])
        probs = np.asarray(self.weights, dtype=float)
        probs = probs / probs.sum()
        return int(self.values[int(rng.choice(len(self.values), p=probs))])


@dataclass(frozen=True)
class SynthConfig:
    """Open-loop generator settings. ``lam`` is requests per millisecond."""

    lam: float = 0.05
    short_fraction: float = 0.63
    short_len_dist: LengthDist = field(
        default_factory=lambda: LengthDist.uniform(16, 255)
    )
    long_len_dist: LengthDist = field(
        default_factory=lambda: LengthDist.uniform(256, 2048)
    )
    reprefill_short_fraction: float | None = None
    reprefill_short_len_dist: LengthDist | None = None
    reprefill_long_len_dist: LengthDist | None = None
    turns_per_session: LengthDist = field(default_factory=lambda: LengthDist.fixed(1))
    gen_len_dist: LengthDist | None = None
    active_sessions: int = 16
    slo_offset: float | None = 400.0
    max_context: int = DEFAULT_MAX_CONTEXT
    seed: int = 42

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise InvalidConfig(f"arrival rate must be > 0, got {self.lam}")
        for name in ("short_fraction", "reprefill_short_fraction"):
            value = getattr(self, name)
            if value is not None and not 0 <= value <= 1:
                raise InvalidConfig(f"{name} must be in [0, 1], got {value}")
        if self.active_sessions < 1:
            raise InvalidConfig("active_sessions must be >= 1")
        if self.slo_offset is not None and self.slo_offset <= 0:
            raise InvalidConfig("slo_offset must be > 0")
        for dist in (
            self.short_len_dist,
            self.long_len_dist,
            self.reprefill_short_len_dist,
            self.reprefill_long_len_dist,
            self.gen_len_dist,
        ):
            if dist is not None and dist.max_value > self.max_context:
                raise InvalidConfig(
                    f"length support exceeds max_context {self.max_context}"
                )


@dataclass
class _Session:
    session_id: int
    turns: int
    next_turn: int = 1
    history: int = 0


def _draw_length(cfg: SynthConfig, turn: int, rng: np.random.Generator) -> int:
    if turn == 1:
        fraction = cfg.short_fraction
        short, long = cfg.short_len_dist, cfg.long_len_dist
    else:
        fraction = (
            cfg.short_fraction
            if cfg.reprefill_short_fraction is None
            else cfg.reprefill_short_fraction
        )
        short = cfg.reprefill_short_len_dist or cfg.short_len_dist
        long = cfg.reprefill_long_len_dist or cfg.long_len_dist
    dist = short if rng.random() < fraction else long
    return dist.sample(rng)


def _arrival_times(lam: float, duration: float, rng: np.random.Generator) -> np.ndarray:
    expected = lam * duration
    chunk = max(16, int(expected + 6 * np.sqrt(expected) + 16))
    times: list[np.ndarray] = []
    start = 0.0
    while True:
        block = start + np.cumsum(rng.exponential(1.0 / lam, size=chunk))
        times.append(block[block < duration])
        if block[-1] >= duration:
            break
        start = float(block[-1])
    return np.concatenate(times)


def synth_stream(cfg: SynthConfig, duration: float) -> list[Request]:
    """Poisson arrivals over ``[0, duration)`` assigned to multi-turn sessions."""
    if not duration > 0:
        raise InvalidConfig(f"duration must be > 0, got {duration}")
    rng = np.random.default_rng(cfg.seed)
    arrivals = _arrival_times(cfg.lam, duration, rng)

    open_sessions: list[_Session] = []
    next_session = 0
    requests: list[Request] = []
    for request_id, arrival in enumerate(arrivals):
        if len(open_sessions) < cfg.active_sessions:
            session = _Session(
                session_id=next_session, turns=cfg.turns_per_session.sample(rng)
            )
            next_session += 1
            open_sessions.append(session)
        else:
            session = open_sessions[int(rng.integers(len(open_sessions)))]

        arrival_time = float(arrival)
        new_tokens = _draw_length(cfg, session.next_turn, rng)
        gen_tokens = cfg.gen_len_dist.sample(rng) if cfg.gen_len_dist else None
        requests.append(
            Request(
                id=request_id,
                session_id=session.session_id,
                turn=session.next_turn,
                new_tokens=new_tokens,
                history_tokens=session.history,
                arrival_time=arrival_time,
                deadline=(
                    None if cfg.slo_offset is None else arrival_time + cfg.slo_offset
                ),
                gen_tokens=gen_tokens,
            )
        )
        session.history += new_tokens + (gen_tokens or 0)
        session.next_turn += 1
        if session.next_turn > session.turns or session.history >= cfg.max_context:
            open_sessions.remove(session)
    return requests


@dataclass(frozen=True)
class ClosedLoopConfig:
    """Fixed client populations that resubmit after each completion."""

    short_clients: int = 8
    long_clients: int = 0
    short_len_dist: LengthDist = field(default_factory=lambda: LengthDist.fixed(128))
    long_len_dist: LengthDist = field(default_factory=lambda: LengthDist.fixed(2048))
    think_time: float = 0.0
    slo_offset: float | None = 400.0
    seed: int = 42

    def __post_init__(self) -> None:
        if self.short_clients < 0 or self.long_clients < 0:
            raise InvalidConfig("client counts must be >= 0")
        if self.think_time < 0:
            raise InvalidConfig("think_time must be >= 0")


class ClosedLoopSource:
    """Issues one request per client and the next one after each completion.

    Each request opens its own single-turn session. Think times are exponential
    with mean ``think_time`` (zero means immediate resubmission).
    """

    def __init__(self, cfg: ClosedLoopConfig, horizon: float) -> None:
        self.cfg = cfg
        self.horizon = horizon
        self._rng = np.random.default_rng(cfg.seed)
        self._next_id = 0
        self._client_of: dict[int, int] = {}
        self._dists: list[LengthDist] = [cfg.short_len_dist] * cfg.short_clients + [
            cfg.long_len_dist
        ] * cfg.long_clients

    def _issue(self, client: int, at: float) -> Request:
        request_id = self._next_id
        self._next_id += 1
        self._client_of[request_id] = client
        return Request(
            id=request_id,
            session_id=request_id,
            turn=1,
            new_tokens=self._dists[client].sample(self._rng),
            history_tokens=0,
            arrival_time=at,
            deadline=at + self.cfg.slo_offset if self.cfg.slo_offset else None,
        )

    def initial_requests(self) -> list[Request]:
        # Each client's first request waits one think-time draw.
        requests = []
        for client in range(len(self._dists)):
            requests.append(self._issue(client, self._think()))
        return sorted(requests, key=lambda r: (r.arrival_time, r.id))

    def _think(self) -> float:
        if self.cfg.think_time <= 0:
            return 0.0
        return float(self._rng.exponential(self.cfg.think_time))

    def on_complete(self, request_id: int, now: float) -> Request | None:
        client = self._client_of.pop(request_id, None)
        if client is None:
            return None
        at = now + self._think()
        if at >= self.horizon:
            return None
        return self._issue(client, at)


def short_share_by_turn(
    requests: Sequence[Request], threshold: int = 256
) -> tuple[float, float]:
    """Fraction of first-turn and of later-turn prompts below ``threshold`` tokens."""
    first = [r.new_tokens < threshold for r in requests if r.turn == 1]
    later = [r.new_tokens < threshold for r in requests if r.turn > 1]
    return _share(first), _share(later)


def _share(flags: list[bool]) -> float:
    return sum(flags) / len(flags) if flags else 0.0
