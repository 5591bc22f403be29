"""Instance-pressure controller for the short/long pool split."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

from laps_sim.errors import ConfigError, EmptyPool, InvariantViolation

logger = logging.getLogger(__name__)


class Pool(str, Enum):
    SHORT = "short"
    LONG = "long"

    @property
    def other(self) -> "Pool":
        return Pool.LONG if self is Pool.SHORT else Pool.SHORT


@dataclass(frozen=True)
class InstanceStats:
    q: float = 0.0
    e: float = 0.0
    u: float = 0.0

    def __post_init__(self) -> None:
        if self.q < 0 or self.e < 0:
            raise InvariantViolation(f"backlog and SLA deviation must be >= 0: {self}")
        if not 0 <= self.u <= 1:
            raise InvariantViolation(f"utilization must be in [0, 1]: {self}")


@dataclass(frozen=True)
class ControllerConfig:
    dt: float = 100.0
    t_cool: float = 500.0
    tau_hyst: float = 0.25
    n_min: int = 1
    w_q: float = 1.0
    w_e: float = 10.0
    w_u: float = 5.0
    aggregator_percentile: float = 90.0

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.t_cool < 0 or self.tau_hyst < 0 or self.n_min < 0:
            raise ConfigError("t_cool, tau_hyst and n_min must be >= 0")
        if min(self.w_q, self.w_e, self.w_u) < 0:
            raise ConfigError("pressure weights must be >= 0")
        if not 0 < self.aggregator_percentile <= 100:
            raise ConfigError("aggregator_percentile must be in (0, 100]")


@dataclass
class PoolState:
    assignment: dict[int, Pool]
    t_last: float = -math.inf

    @classmethod
    def split(cls, n_instances: int, n_short: int) -> "PoolState":
        """Instances ``0..n_short-1`` serve short prefills, the rest long ones."""
        if not 0 <= n_short <= n_instances:
            raise ConfigError(f"cannot give {n_short} of {n_instances} to short pool")
        return cls(
            assignment={
                i: Pool.SHORT if i < n_short else Pool.LONG for i in range(n_instances)
            }
        )

    def members(self, pool: Pool) -> list[int]:
        return sorted(i for i, p in self.assignment.items() if p is pool)

    @property
    def n_s(self) -> int:
        return len(self.members(Pool.SHORT))

    @property
    def n_l(self) -> int:
        return len(self.members(Pool.LONG))

    def validate(self, cfg: ControllerConfig) -> None:
        if 2 * cfg.n_min > len(self.assignment):
            raise ConfigError(
                f"n_min={cfg.n_min} leaves no valid split of {len(self.assignment)}"
            )
        if min(self.n_s, self.n_l) < cfg.n_min:
            raise ConfigError(f"pool below n_min={cfg.n_min}: {self.n_s}/{self.n_l}")


@dataclass(frozen=True)
class Migration:
    instance: int
    source: Pool
    target: Pool
    time: float
    pressures: tuple[float, float] = field(default=(0.0, 0.0))


def pressure(s: InstanceStats, cfg: ControllerConfig) -> float:
    return cfg.w_q * s.q + cfg.w_e * s.e - cfg.w_u * s.u


def aggregate(scores: Sequence[float], percentile: float = 90.0) -> float:
    """Nearest-rank percentile of the pool's instance pressures."""
    if not scores:
        raise EmptyPool("cannot aggregate an empty pool")
    ordered = sorted(scores)
    rank = max(1, math.ceil(percentile / 100 * len(ordered)))
    return ordered[rank - 1]


def decide(
    p_s: float,
    p_l: float,
    state: PoolState,
    cfg: ControllerConfig,
    now: float,
    scores: Mapping[int, float] | None = None,
) -> Migration | None:
    """Move at most one instance toward the pool under more pressure.

    The donor is the donor pool's lowest-pressure instance (lowest id on ties).
    On a migration the assignment and ``t_last`` are updated in place.
    """
    if now - state.t_last < cfg.t_cool:
        return None

    if p_s > (1 + cfg.tau_hyst) * p_l and state.n_l > cfg.n_min:
        source = Pool.LONG
    elif p_l > (1 + cfg.tau_hyst) * p_s and state.n_s > cfg.n_min:
        source = Pool.SHORT
    else:
        return None

    donors = state.members(source)
    scores = scores or {}
    instance = min(donors, key=lambda i: (scores.get(i, 0.0), i))
    state.assignment[instance] = source.other
    state.t_last = now
    logger.debug(
        "migrate instance %d %s->%s at %.1f (p_s=%.3f p_l=%.3f)",
        instance,
        source.value,
        source.other.value,
        now,
        p_s,
        p_l,
    )
    return Migration(
        instance=instance,
        source=source,
        target=source.other,
        time=now,
        pressures=(p_s, p_l),
    )
