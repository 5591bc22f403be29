"""Experiment configuration from flat ``section.key=value`` files.

Files are read with python-dotenv, so ``#`` comments, blank lines and quoted
values work as in any ``.env`` file. Keys may carry a ``_ms`` suffix (for
example ``sched.w_max_ms``) and memory sizes a ``_mb`` suffix.
"""

from __future__ import annotations

import dataclasses
import logging
import os
import types
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Union, get_args, get_origin, get_type_hints

from dotenv import dotenv_values

from laps_sim.controller import ControllerConfig
from laps_sim.cost_model import CostParams, ExecOverheads, RooflineParams
from laps_sim.errors import ConfigError
from laps_sim.scheduler import GraphGrid, SchedConfig
from laps_sim.scheduler.grid import MB, MODEL_PRESETS
from laps_sim.sim.engine import SimConfig
from laps_sim.workload import LengthDist

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "LAPS_SIM_CONFIG"


class WorkloadKind(str, Enum):
    POISSON = "poisson"
    CLOSED_LOOP = "closed_loop"
    TRACE = "trace"


@dataclass(frozen=True)
class WorkloadSpec:
    """Request source settings; generators are seeded from ``sim.seed``."""

    kind: WorkloadKind = WorkloadKind.POISSON
    trace: str | None = None
    lam: float = 0.05
    short_fraction: float = 0.63
    reprefill_short_fraction: float | None = None
    short_len: LengthDist = field(default_factory=lambda: LengthDist.uniform(16, 255))
    long_len: LengthDist = field(default_factory=lambda: LengthDist.uniform(256, 2048))
    reprefill_short_len: LengthDist | None = None
    reprefill_long_len: LengthDist | None = None
    turns: LengthDist = field(default_factory=lambda: LengthDist.fixed(1))
    gen_len: LengthDist | None = None
    active_sessions: int = 16
    slo_offset: float | None = 400.0
    max_context: int = 32768
    short_clients: int = 8
    long_clients: int = 0
    think_time: float = 0.0

    def __post_init__(self) -> None:
        if self.kind == WorkloadKind.TRACE and not self.trace:
            raise ConfigError("workload.kind=trace needs workload.trace")


@dataclass(frozen=True)
class ExperimentConfig:
    cost: CostParams = field(default_factory=CostParams)
    overheads: ExecOverheads = field(default_factory=ExecOverheads)
    roofline: RooflineParams = field(default_factory=RooflineParams)
    grid: GraphGrid = field(default_factory=GraphGrid)
    sched: SchedConfig = field(default_factory=SchedConfig)
    ctrl: ControllerConfig = field(default_factory=ControllerConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    raw: dict[str, str] = field(default_factory=dict, compare=False)

    def with_values(self, values: Mapping[str, Any]) -> "ExperimentConfig":
        """Copy with extra ``section.key`` values layered on top."""
        text = {k: str(v) for k, v in values.items()}
        per_section = _parse_values(text)
        changed = {}
        for section, (attr, _) in SECTIONS.items():
            if per_section[section]:
                changed[attr] = replace(getattr(self, attr), **per_section[section])
        return replace(self, **changed, raw={**self.raw, **text})


SECTIONS: dict[str, tuple[str, type]] = {
    "cost": ("cost", CostParams),
    "exec": ("overheads", ExecOverheads),
    "roofline": ("roofline", RooflineParams),
    "grid": ("grid", GraphGrid),
    "sched": ("sched", SchedConfig),
    "ctrl": ("ctrl", ControllerConfig),
    "sim": ("sim", SimConfig),
    "workload": ("workload", WorkloadSpec),
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}
_NONE = {"", "none", "null"}


def _coerce(raw: str, hint: Any, key: str) -> Any:
    origin = get_origin(hint)
    if origin in (Union, types.UnionType):
        options = [a for a in get_args(hint) if a is not type(None)]
        if raw.strip().lower() in _NONE:
            return None
        return _coerce(raw, options[0], key)

    text = raw.strip()
    try:
        if hint is bool:
            lowered = text.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if hint is int:
            number = float(text)
            if not number.is_integer():
                raise ValueError(f"not an integer: {text!r}")
            return int(number)
        if hint is float:
            return float(text)
        if hint is str:
            return text
        if origin is tuple:
            (item, *_) = get_args(hint)
            return tuple(item(v) for v in text.split(",") if v.strip())
        if isinstance(hint, type) and issubclass(hint, Enum):
            return hint(text.lower())
        if hint is LengthDist:
            return LengthDist.parse(text)
    except ConfigError as exc:
        raise ConfigError(f"{key}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from exc
    raise ConfigError(f"{key}: unsupported field type {hint}")


def _resolve(cls: type, name: str, raw: str, key: str) -> tuple[str, Any]:
    hints = get_type_hints(cls)
    if name in hints:
        return name, _coerce(raw, hints[name], key)
    if name.endswith("_ms") and name[:-3] in hints:
        return name[:-3], _coerce(raw, hints[name[:-3]], key)
    if name.endswith("_mb") and name[:-3] in hints:
        return name[:-3], int(round(float(raw) * MB))
    raise ConfigError(f"unknown config key '{key}'")


def _parse_values(values: Mapping[str, str | None]) -> dict[str, dict[str, Any]]:
    per_section: dict[str, dict[str, Any]] = {name: {} for name in SECTIONS}
    for key, value in values.items():
        if value is None:
            raise ConfigError(f"config key '{key}' has no value")
        section, _, name = key.partition(".")
        if section not in SECTIONS or not name:
            raise ConfigError(f"unknown config key '{key}'")
        _, cls = SECTIONS[section]

        if section == "grid" and name == "preset":
            try:
                per_section["grid"]["mem_per_graph"] = MODEL_PRESETS[value.lower()]
            except KeyError as exc:
                raise ConfigError(f"{key}: unknown model preset '{value}'") from exc
            continue
        if section == "grid" and name in ("capture_startup_ms", "capture_startup"):
            per_section["sim"]["capture_startup_ms"] = _coerce(value, float, key)
            continue

        field_name, parsed = _resolve(cls, name, value, key)
        per_section[section][field_name] = parsed
    return per_section


def build_config(values: Mapping[str, str | None]) -> ExperimentConfig:
    """Turn a flat ``section.key -> text`` mapping into typed configs."""
    per_section = _parse_values(values)
    built = {attr: cls(**per_section[s]) for s, (attr, cls) in SECTIONS.items()}
    raw = {k: v for k, v in values.items() if v is not None}
    return ExperimentConfig(**built, raw=raw)


def load_config(
    path: Path | str | None = None, overrides: Mapping[str, Any] | None = None
) -> ExperimentConfig:
    """Read a config file (or ``$LAPS_SIM_CONFIG``) and apply overrides.

    Precedence is dataclass defaults, then the file, then ``overrides``.
    """
    path = path or os.getenv(CONFIG_ENV_VAR)
    values: dict[str, str | None] = {}
    if path:
        source = Path(path)
        if not source.is_file():
            raise ConfigError(f"config file not found: {source}")
        values.update(dotenv_values(source))
        logger.info("loaded %d config keys from %s", len(values), source)
    if overrides:
        values.update({k: str(v) for k, v in overrides.items()})
    return build_config(values)


def dump_config(cfg: ExperimentConfig) -> dict[str, Any]:
    """Resolved values of every section, for provenance next to results."""
    out: dict[str, Any] = {}
    for section, (attr, _) in SECTIONS.items():
        for f in dataclasses.fields(getattr(cfg, attr)):
            value = getattr(getattr(cfg, attr), f.name)
            if isinstance(value, Enum):
                value = value.value
            elif isinstance(value, LengthDist):
                value = str(value)
            elif isinstance(value, tuple):
                value = list(value)
            out[f"{section}.{f.name}"] = value
    return out
