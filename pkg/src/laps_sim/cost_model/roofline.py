"""Roofline classification of prefill lengths."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from laps_sim.errors import ConfigError


class Boundness(str, Enum):
    COMPUTE_BOUND = "compute_bound"
    MEMORY_BOUND = "memory_bound"


@dataclass(frozen=True)
class RooflineParams:
    """Hardware roofline; defaults approximate an H200-class GPU.

    Arithmetic intensity grows linearly with prompt length:
    ``AI(L) = ops_per_token / bytes_per_token * L``.
    """

    p_peak: float = 989e12
    b_mem: float = 4.8e12
    bytes_per_token: float = 1.0
    ops_per_token: float = 1.0

    def __post_init__(self) -> None:
        fields = (self.p_peak, self.b_mem, self.bytes_per_token, self.ops_per_token)
        if min(fields) <= 0:
            raise ConfigError(f"roofline parameters must be > 0: {fields}")

    @property
    def ridge_intensity(self) -> float:
        return self.p_peak / self.b_mem


def arithmetic_intensity(L: float, r: RooflineParams) -> float:
    return r.ops_per_token / r.bytes_per_token * L


def roofline_crossover(r: RooflineParams) -> float:
    """Prompt length where ``AI(L)`` reaches the ridge point."""
    return r.ridge_intensity * r.bytes_per_token / r.ops_per_token


def roofline_classify(L: int, r: RooflineParams) -> Boundness:
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    # A tie at the ridge point counts as compute-bound.
    if arithmetic_intensity(L, r) >= r.ridge_intensity:
        return Boundness.COMPUTE_BOUND
    return Boundness.MEMORY_BOUND
