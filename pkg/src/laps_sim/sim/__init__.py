"""Discrete-event simulation of the prefill tier.

The engine lives in :mod:`laps_sim.sim.engine`; this package root only
exposes the event types so metric code can import them without the engine.
"""

from .events import Event, EventKind, EventLog, EventRecord, RecordKind

__all__ = ["Event", "EventKind", "EventLog", "EventRecord", "RecordKind"]
