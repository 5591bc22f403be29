"""Scheduler configuration and per-instance batching state."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from laps_sim.errors import ConfigError
from .grid import GraphGrid


class SchedMode(str, Enum):
    SLA = "sla"
    DEADLINE_FREE = "deadline_free"


@dataclass(frozen=True)
class SchedConfig:
    """Batching knobs. Times in ms, ``epsilon`` in requests per ms."""

    w_min: float = 1.0
    w_max: float = 50.0
    sigma: float = 10.0
    delta: float = 5.0
    t_max: float = 100.0
    epsilon: float = 1e-6
    m_s: int = 2048
    c_l: int = 512
    mode: SchedMode = SchedMode.SLA
    ewma: float = 0.2
    s_hat_init: float = 5.0
    d_init: int | None = None
    depth_recovery: bool = True
    max_batch_tokens: int = 16384
    fcfs_token_budget: int = 8192
    fcfs_max_batch: int = 256
    short_boundary: float | None = None
    reprefill_boundary: float | None = None
    h_dependent_boundary: bool = False

    def __post_init__(self) -> None:
        if not 0 <= self.w_min <= self.w_max:
            raise ConfigError(
                f"need 0 <= w_min <= w_max, got {self.w_min}, {self.w_max}"
            )
        if min(self.sigma, self.delta, self.t_max) < 0:
            raise ConfigError("sigma, delta and t_max must be >= 0")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be > 0")
        if self.m_s < 1 or self.c_l < 1:
            raise ConfigError("m_s and c_l must be >= 1")
        if not 0 < self.ewma <= 1:
            raise ConfigError(f"ewma must be in (0, 1], got {self.ewma}")
        if self.s_hat_init < 0:
            raise ConfigError("s_hat_init must be >= 0")
        if self.d_init is not None and self.d_init < 1:
            raise ConfigError("d_init must be >= 1")
        if self.max_batch_tokens < 1:
            raise ConfigError("max_batch_tokens must be >= 1")
        if self.fcfs_token_budget < 1 or self.fcfs_max_batch < 1:
            raise ConfigError("fcfs_token_budget and fcfs_max_batch must be >= 1")
        for name in ("short_boundary", "reprefill_boundary"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ConfigError(f"{name} must be >= 0")

    def clip(self, window: float) -> float:
        return min(max(window, self.w_min), self.w_max)


@dataclass(frozen=True)
class AWDState:
    """Adaptive wait/depth targets plus the estimators feeding them.

    ``round_start`` is set while a batch is being accumulated and cleared on
    dispatch.
    """

    w: float
    d: int
    s_hat: float
    r_hat: float
    round_start: float | None = None

    @classmethod
    def initial(cls, cfg: SchedConfig, grid: GraphGrid) -> "AWDState":
        depth = grid.max_depth
        if cfg.d_init is not None:
            depth = min(cfg.d_init, depth)
        return cls(w=cfg.w_max, d=depth, s_hat=cfg.s_hat_init, r_hat=0.0)
