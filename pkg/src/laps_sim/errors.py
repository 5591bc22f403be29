"""Exception hierarchy shared by every laps_sim module."""

from __future__ import annotations


class LapsSimError(Exception):
    """Base class for all simulator errors."""


class ConfigError(LapsSimError, ValueError):
    """A configuration value violates its invariants or is unknown."""


class InvalidConfig(ConfigError):
    """A workload generator configuration cannot produce requests."""


class EmptyInput(LapsSimError, ValueError):
    pass


class DegenerateSamples(LapsSimError, ValueError):
    """Latency samples do not determine every cost coefficient."""


class ShapeMismatch(LapsSimError, ValueError):
    pass


class UnstableQueue(LapsSimError, ValueError):
    """Utilization is at or above one, so no steady-state wait exists."""


class InvalidMoments(LapsSimError, ValueError):
    pass


class InvariantViolation(LapsSimError, ValueError):
    pass


class ParseError(LapsSimError, ValueError):
    """A trace line could not be decoded into a request."""

    def __init__(self, message: str, line_number: int | None = None) -> None:
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class EmptyPool(LapsSimError, ValueError):
    pass


class EmptySamples(LapsSimError, ValueError):
    pass
