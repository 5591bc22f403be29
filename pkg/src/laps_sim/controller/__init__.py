"""Pool rebalancing between short- and long-prefill instances."""

from .pressure import (
    ControllerConfig,
    InstanceStats,
    Migration,
    Pool,
    PoolState,
    aggregate,
    decide,
    pressure,
)

__all__ = [
    "ControllerConfig",
    "InstanceStats",
    "Migration",
    "Pool",
    "PoolState",
    "aggregate",
    "decide",
    "pressure",
]
