"""Closed-form prefill/re-prefill latency model.

All times are milliseconds and all lengths are tokens.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from laps_sim.errors import ConfigError, ShapeMismatch


@dataclass(frozen=True)
class CostParams:
    """Fitted per-token coefficients of the latency model.

    The defaults place the first-turn compute/memory boundary at 256 tokens.
    """

    alpha: float = 1e-5
    beta: float = 0.01
    gamma_w: float = 0.01256
    gamma_r: float = 0.002

    def __post_init__(self) -> None:
        values = (self.alpha, self.beta, self.gamma_w, self.gamma_r)
        if not all(math.isfinite(v) for v in values):
            raise ConfigError(f"cost coefficients must be finite: {values}")
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        if min(self.beta, self.gamma_w, self.gamma_r) < 0:
            raise ConfigError("beta, gamma_w and gamma_r must be >= 0")


@dataclass(frozen=True)
class ExecOverheads:
    kappa_graph: float = 0.05
    kappa_std: float = 0.5
    eta: float = 0.7

    def __post_init__(self) -> None:
        if not 0 <= self.kappa_graph <= self.kappa_std:
            raise ConfigError(
                f"need 0 <= kappa_graph <= kappa_std, got "
                f"{self.kappa_graph}, {self.kappa_std}"
            )
        if not 0 < self.eta <= 1:
            raise ConfigError(f"eta must be in (0, 1], got {self.eta}")


class KernelKind(str, Enum):
    GRAPH = "graph"
    STANDARD = "standard"


@dataclass(frozen=True)
class BatchShape:
    l_pad: int
    depth: int
    kind: KernelKind = KernelKind.STANDARD

    def __post_init__(self) -> None:
        if self.l_pad < 1 or self.depth < 1:
            raise ShapeMismatch(
                f"shape needs l_pad >= 1 and depth >= 1, got {self.l_pad}x{self.depth}"
            )

    @property
    def padded_tokens(self) -> int:
        return self.l_pad * self.depth


def compute_latency(L: float, H: float, p: CostParams) -> tuple[float, float]:
    """Return ``(t_comp, t_mem)`` for ``L`` new tokens over ``H`` history tokens."""
    t_comp = p.alpha * L * (L + 2 * H) + p.beta * L
    t_mem = p.gamma_w * L + p.gamma_r * H
    return t_comp, t_mem


def total_latency(L: float, H: float, p: CostParams) -> float:
    t_comp, t_mem = compute_latency(L, H, p)
    return t_comp + t_mem


def prefill_boundary(p: CostParams) -> float:
    """Token length where first-turn prefill turns compute-bound."""
    return max(0.0, (p.gamma_w - p.beta) / p.alpha)


def reprefill_boundary(p: CostParams, H: float) -> float:
    """Nonnegative root of ``t_comp(L, H) = t_mem(L, H)`` in ``L``."""
    b = 2 * p.alpha * H + p.beta - p.gamma_w
    c = p.gamma_r * H
    disc = b * b + 4 * p.alpha * c
    root = math.sqrt(disc)
    if b > 0:
        # Rationalized form; avoids cancellation once 2*alpha*H dominates.
        if root + b == 0:
            return 0.0
        return max(0.0, 2 * c / (b + root))
    return max(0.0, (-b + root) / (2 * p.alpha))


def batch_service_time(
    shape: BatchShape,
    members: Sequence[tuple[float, float]],
    p: CostParams,
    o: ExecOverheads,
) -> float:
    """Service time of one launched batch.

    Every member is charged at the padded length ``shape.l_pad``; empty graph
    slots are passed in as ``(0, 0)`` members.
    """
    if len(members) != shape.depth:
        raise ShapeMismatch(
            f"shape depth {shape.depth} does not match {len(members)} members"
        )
    work = 0.0
    for L, H in members:
        if L > shape.l_pad:
            raise ShapeMismatch(f"member length {L} exceeds l_pad {shape.l_pad}")
        work += total_latency(shape.l_pad, H, p)
    kappa = o.kappa_graph if shape.kind == KernelKind.GRAPH else o.kappa_std
    return kappa + shape.depth ** (o.eta - 1.0) * work
