"""Scenario assembly, paired policy comparisons and parameter sweeps."""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Any, Sequence

from joblib import Parallel, delayed

from laps_sim.config import ExperimentConfig, WorkloadKind
from laps_sim.errors import ConfigError
from laps_sim.metrics import MetricsReport
from laps_sim.sim.engine import Policy, SimResult, run
from laps_sim.workload import (
    ClosedLoopConfig,
    ClosedLoopSource,
    Request,
    SynthConfig,
    load_trace,
    synth_stream,
)

logger = logging.getLogger(__name__)

# Short names accepted by ``sweep --param``.
SWEEP_ALIASES = {
    "short_concurrency": "workload.short_clients",
    "long_concurrency": "workload.long_clients",
    "lam": "workload.lam",
    "w_max": "sched.w_max",
    "w_max_ms": "sched.w_max",
    "instances": "sim.n_instances",
    "policy": "sim.policy",
}

# Keys that only a closed-loop client source reads.
CLOSED_LOOP_KEYS = frozenset(
    {"workload.short_clients", "workload.long_clients", "workload.think_time"}
)


def synth_config(cfg: ExperimentConfig) -> SynthConfig:
    w = cfg.workload
    return SynthConfig(
        lam=w.lam,
        short_fraction=w.short_fraction,
        short_len_dist=w.short_len,
        long_len_dist=w.long_len,
        reprefill_short_fraction=w.reprefill_short_fraction,
        reprefill_short_len_dist=w.reprefill_short_len,
        reprefill_long_len_dist=w.reprefill_long_len,
        turns_per_session=w.turns,
        gen_len_dist=w.gen_len,
        active_sessions=w.active_sessions,
        slo_offset=w.slo_offset,
        max_context=w.max_context,
        seed=cfg.sim.seed,
    )


def closed_loop_config(cfg: ExperimentConfig) -> ClosedLoopConfig:
    w = cfg.workload
    return ClosedLoopConfig(
        short_clients=w.short_clients,
        long_clients=w.long_clients,
        short_len_dist=w.short_len,
        long_len_dist=w.long_len,
        think_time=w.think_time,
        slo_offset=w.slo_offset,
        seed=cfg.sim.seed,
    )


def build_workload(
    cfg: ExperimentConfig,
) -> tuple[list[Request], ClosedLoopSource | None]:
    """Requests for an open-loop run, or a closed-loop client source."""
    kind = cfg.workload.kind
    if kind == WorkloadKind.TRACE:
        assert cfg.workload.trace is not None
        return load_trace(cfg.workload.trace), None
    if kind == WorkloadKind.CLOSED_LOOP:
        return [], ClosedLoopSource(closed_loop_config(cfg), horizon=cfg.sim.duration)
    return synth_stream(synth_config(cfg), cfg.sim.duration), None


def run_experiment(
    cfg: ExperimentConfig, requests: Sequence[Request] | None = None
) -> SimResult:
    source = None
    if requests is None:
        requests, source = build_workload(cfg)
    return run(
        cfg.sim,
        requests,
        cost=cfg.cost,
        overheads=cfg.overheads,
        sched=cfg.sched,
        ctrl=cfg.ctrl,
        grid=cfg.grid,
        source=source,
    )


def compare_policies(
    cfg: ExperimentConfig, policies: Sequence[Policy]
) -> dict[Policy, MetricsReport]:
    """Run every policy on one shared request stream."""
    requests, source = build_workload(cfg)
    if source is not None:
        raise ConfigError("paired comparisons need an open-loop or trace workload")
    reports = {}
    for policy in policies:
        variant = replace(cfg, sim=replace(cfg.sim, policy=policy))
        reports[policy] = run_experiment(variant, requests).report
    return reports


def resolve_param(param: str) -> str:
    key = SWEEP_ALIASES.get(param, param)
    if "." not in key:
        raise ConfigError(
            f"unknown sweep parameter '{param}'; use section.key or one of "
            f"{sorted(SWEEP_ALIASES)}"
        )
    return key


def _sweep_point(cfg: ExperimentConfig, key: str, param: str, value: str) -> dict:
    point = cfg.with_values({key: value})
    report = run_experiment(point).report
    return {param: _as_number(value), **report.flat()}


def _as_number(value: str) -> Any:
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            continue
    return value


def sweep(
    cfg: ExperimentConfig,
    param: str,
    values: Sequence[Any],
    n_jobs: int = 1,
) -> list[dict[str, Any]]:
    """One metrics row per value of ``param``; points run in parallel."""
    if not values:
        raise ConfigError("sweep needs at least one value")
    key = resolve_param(param)
    if key in CLOSED_LOOP_KEYS and cfg.workload.kind != WorkloadKind.CLOSED_LOOP:
        if cfg.workload.kind == WorkloadKind.TRACE:
            raise ConfigError(f"{param} needs a closed-loop workload, not a trace")
        logger.info("%s drives closed-loop clients; switching workload kind", param)
        cfg = cfg.with_values({"workload.kind": WorkloadKind.CLOSED_LOOP.value})
    logger.info("sweeping %s over %d values with n_jobs=%d", key, len(values), n_jobs)
    rows = Parallel(n_jobs=n_jobs)(
        delayed(_sweep_point)(cfg, key, param, str(v)) for v in values
    )
    return sorted(rows, key=lambda row: row[param])
