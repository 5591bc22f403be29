"""Acceptance suite: oracle agreement, formula exactness and scenario checks.

Every check returns a :class:`CheckResult` carrying the measured numbers, so
the CLI can print them and tests can assert on them without re-running.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Sequence

import numpy as np

from laps_sim.controller import ControllerConfig, Pool, PoolState, aggregate, decide
from laps_sim.cost_model import (
    CostParams,
    ExecOverheads,
    compute_latency,
    fit_params,
    generate_samples,
    reprefill_boundary,
)
from laps_sim.errors import ConfigError, DegenerateSamples
from laps_sim.metrics import MetricsReport
from laps_sim.queueing import ServiceMix, hol_penalty, mix_wait
from laps_sim.scheduler import (
    AWDState,
    GraphGrid,
    RequestQueue,
    SchedConfig,
    combined_window,
    nearest_graph,
)
from laps_sim.sim.engine import DisaggMode, Policy, Router, SimConfig, SimResult, run
from laps_sim.sim.events import EventLog, RecordKind
from laps_sim.workload import (
    ClosedLoopConfig,
    ClosedLoopSource,
    LengthDist,
    Request,
    SynthConfig,
    synth_stream,
)

logger = logging.getLogger(__name__)

# Service time equals the prompt length in ms: L=1 runs 1 ms, L=3 runs 3 ms.
UNIT_COST = CostParams(alpha=1e-12, beta=1.0, gamma_w=0.0, gamma_r=0.0)
NO_OVERHEAD = ExecOverheads(kappa_graph=0.0, kappa_std=0.0)
SINGLE_JOB = SchedConfig(fcfs_max_batch=1)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    elapsed_s: float = 0.0
    details: dict[str, Any] = field(default_factory=dict)
    budget_s: float | None = None

    @property
    def within_budget(self) -> bool:
        return self.budget_s is None or self.elapsed_s <= self.budget_s


# -- helpers --------------------------------------------------------------


def two_point_stream(
    n_jobs: int,
    lam: float,
    p_short: float,
    short_tokens: int,
    long_tokens: int,
    seed: int = 42,
) -> list[Request]:
    """Poisson arrivals whose prompt lengths take one of two values."""
    rng = np.random.default_rng(seed)
    arrivals = np.cumsum(rng.exponential(1.0 / lam, size=n_jobs))
    is_short = rng.random(n_jobs) < p_short
    return [
        Request(
            id=i,
            session_id=i,
            turn=1,
            new_tokens=short_tokens if is_short[i] else long_tokens,
            history_tokens=0,
            arrival_time=float(arrivals[i]),
        )
        for i in range(n_jobs)
    ]


def queue_waits(log: EventLog) -> np.ndarray:
    """Per-request wait (first dispatch minus arrival), in dispatch order."""
    arrival_at = {
        r.request_ids[0]: r.time_ms for r in log.of_kind(RecordKind.ARRIVAL)
    }
    waits = []
    seen: set[int] = set()
    for record in log.of_kind(RecordKind.DISPATCH):
        for request_id in record.request_ids:
            if request_id not in seen:
                seen.add(request_id)
                waits.append(record.time_ms - arrival_at[request_id])
    return np.asarray(waits, dtype=float)


def batch_means(samples: np.ndarray, n_batches: int = 20) -> tuple[float, float]:
    """Mean and 95% half-width from non-overlapping batch means."""
    if len(samples) < n_batches:
        raise ConfigError(f"need at least {n_batches} samples for batch means")
    means = np.array([b.mean() for b in np.array_split(samples, n_batches)])
    half_width = 1.96 * means.std(ddof=1) / math.sqrt(n_batches)
    return float(means.mean()), float(half_width)


def _single_server(requests: Sequence[Request]) -> SimResult:
    sim = SimConfig(n_instances=1, policy=Policy.FCFS_UNIFIED)
    return run(sim, requests, cost=UNIT_COST, overheads=NO_OVERHEAD, sched=SINGLE_JOB)


def _timed(
    name: str,
    fn: Callable[[], tuple[bool, dict[str, Any]]],
    budget_s: float | None = None,
) -> CheckResult:
    start = time.perf_counter()
    passed, details = fn()
    result = CheckResult(
        name=name,
        passed=passed,
        elapsed_s=time.perf_counter() - start,
        details=details,
        budget_s=budget_s,
    )
    logger.info(
        "%s: %s in %.2f s", name, "pass" if passed else "FAIL", result.elapsed_s
    )
    if not result.within_budget:
        logger.warning(
            "%s took %.2f s, over its %.0f s budget", name, result.elapsed_s, budget_s
        )
    return result


# -- queueing oracle --------------------------------------------------------


def check_pk(
    n_jobs: int = 100_000, seed: int = 42, tolerance: float = 0.05
) -> CheckResult:
    """Unbatched FCFS mean wait against the Pollaczek-Khinchine prediction."""
    mix = ServiceMix(lam=0.25, p_short=0.5, s_short=1.0, s_long=3.0)

    def body() -> tuple[bool, dict[str, Any]]:
        requests = two_point_stream(n_jobs, mix.lam, mix.p_short, 1, 3, seed)
        waits = queue_waits(_single_server(requests).log)
        mean, half_width = batch_means(waits)
        predicted = mix_wait(mix)
        error = abs(mean - predicted) / predicted
        return error <= tolerance, {
            "rho": mix.rho,
            "predicted_ms": predicted,
            "simulated_ms": mean,
            "ci95_ms": half_width,
            "rel_error": error,
            "jobs": len(waits),
        }

    return _timed("pk_wait", body, budget_s=10.0)


def check_hol(
    n_jobs: int = 100_000, seed: int = 42, tolerance: float = 0.10
) -> CheckResult:
    """Excess wait of the two-point mix over a deterministic queue at equal load.

    Both runs share the arrival times, so the difference isolates the
    service-variance term that the head-of-line penalty predicts.
    """
    mix = ServiceMix(lam=0.25, p_short=0.5, s_short=1.0, s_long=3.0)

    def body() -> tuple[bool, dict[str, Any]]:
        mixed = two_point_stream(n_jobs, mix.lam, mix.p_short, 1, 3, seed)
        flat = [replace(r, new_tokens=2) for r in mixed]
        w_mixed = float(queue_waits(_single_server(mixed).log).mean())
        w_flat = float(queue_waits(_single_server(flat).log).mean())

        predicted = hol_penalty(mix)
        measured = w_mixed - w_flat
        error = abs(measured - predicted) / predicted
        return error <= tolerance, {
            "predicted_ms": predicted,
            "measured_ms": measured,
            "rel_error": error,
            "mixed_wait_ms": w_mixed,
            "deterministic_wait_ms": w_flat,
        }

    return _timed("hol_penalty", body)


# -- cost model -------------------------------------------------------------


def check_cost_exactness(n_cases: int = 1000, seed: int = 7) -> CheckResult:
    def body() -> tuple[bool, dict[str, Any]]:
        rng = np.random.default_rng(seed)
        worst_poly = 0.0
        worst_root = 0.0
        for _ in range(n_cases):
            p = CostParams(
                alpha=float(rng.uniform(1e-7, 1e-4)),
                beta=float(rng.uniform(0.0, 0.05)),
                gamma_w=float(rng.uniform(0.0, 0.05)),
                gamma_r=float(rng.uniform(1e-4, 0.01)),
            )
            L = float(rng.integers(1, 8192))
            H = float(rng.integers(0, 32768))
            t_comp, t_mem = compute_latency(L, H, p)
            expected_comp = p.alpha * L * L + 2 * p.alpha * L * H + p.beta * L
            expected_mem = p.gamma_w * L + p.gamma_r * H
            worst_poly = max(
                worst_poly,
                _rel(t_comp, expected_comp),
                _rel(t_mem, expected_mem),
            )
            H_pos = max(H, 1.0)
            root = reprefill_boundary(p, H_pos)
            c_root, m_root = compute_latency(root, H_pos, p)
            worst_root = max(worst_root, _rel(c_root, m_root))

        p = CostParams()
        limit = p.gamma_r / (2 * p.alpha)
        saturation = _rel(reprefill_boundary(p, 1e6), limit)
        passed = worst_poly <= 1e-9 and worst_root <= 1e-9 and saturation <= 0.01
        return passed, {
            "cases": n_cases,
            "max_poly_rel_error": worst_poly,
            "max_root_rel_error": worst_root,
            "saturation_rel_error": saturation,
        }

    return _timed("cost_exactness", body)


def _rel(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def check_fitting(seed: int = 11) -> CheckResult:
    truth = CostParams(alpha=2e-5, beta=0.012, gamma_w=0.015, gamma_r=0.0025)

    def body() -> tuple[bool, dict[str, Any]]:
        exact = fit_params(generate_samples(truth, n_samples=50, seed=seed))
        noisy = fit_params(
            generate_samples(truth, n_samples=500, noise=0.01, seed=seed)
        )
        exact_err = _param_error(exact, truth)
        noisy_err = _param_error(noisy, truth)
        try:
            fit_params(generate_samples(truth, n_samples=20, seed=seed, max_history=0))
            degenerate_raised = False
        except DegenerateSamples:
            degenerate_raised = True
        passed = exact_err <= 1e-6 and noisy_err <= 0.05 and degenerate_raised
        return passed, {
            "noiseless_rel_error": exact_err,
            "noisy_rel_error": noisy_err,
            "degenerate_raised": degenerate_raised,
        }

    return _timed("fitting", body)


def _param_error(fitted: CostParams, truth: CostParams) -> float:
    pairs = [
        (fitted.alpha, truth.alpha),
        (fitted.beta, truth.beta),
        (fitted.gamma_w, truth.gamma_w),
        (fitted.gamma_r, truth.gamma_r),
    ]
    return max(abs(f - t) / t for f, t in pairs)


# -- scenarios --------------------------------------------------------------

INTERFERENCE_LEVELS = (1, 2, 4, 8, 16, 32, 64)


def _closed_loop_report(
    short_clients: int, long_clients: int, horizon: float
) -> MetricsReport:
    source = ClosedLoopSource(
        ClosedLoopConfig(short_clients=short_clients, long_clients=long_clients),
        horizon=horizon,
    )
    sim = SimConfig(n_instances=1, policy=Policy.FCFS_UNIFIED, duration=horizon)
    return run(
        sim, [], sched=SchedConfig(fcfs_token_budget=65536), source=source
    ).report


def _monotone(values: Sequence[float]) -> bool:
    return all(b >= a for a, b in zip(values, values[1:]))


def check_interference(
    levels: Sequence[int] = INTERFERENCE_LEVELS,
    long_clients: int = 4,
    short_clients: int = 4,
    horizon: float = 10_000.0,
) -> CheckResult:
    """Unified FCFS batching: each class's tail grows with the other's load.

    Short concurrency is swept against ``long_clients`` fixed long clients,
    then long concurrency against ``short_clients`` fixed short clients.
    """

    def body() -> tuple[bool, dict[str, Any]]:
        long_alone = _closed_loop_report(0, long_clients, horizon).long.ttft_p90
        by_short = [_closed_loop_report(n, long_clients, horizon) for n in levels]
        long_p90 = [report.long.ttft_p90 for report in by_short]

        short_alone = _closed_loop_report(short_clients, 0, horizon).short.ttft_p90
        short_p90 = [
            _closed_loop_report(short_clients, n, horizon).short.ttft_p90
            for n in levels
        ]

        long_above = all(p > long_alone for n, p in zip(levels, long_p90) if n >= 4)
        short_above = all(
            p > short_alone for n, p in zip(levels, short_p90) if n >= 4
        )
        passed = (
            _monotone(long_p90)
            and long_above
            and _monotone(short_p90)
            and short_above
        )
        return passed, {
            "levels": list(levels),
            "long_p90_ms": long_p90,
            "long_only_p90_ms": long_alone,
            "short_p90_ms": short_p90,
            "short_only_p90_ms": short_alone,
            "short_p90_at_short_levels_ms": [r.short.ttft_p90 for r in by_short],
        }

    return _timed("interference", body, budget_s=60.0)


def disaggregation_stream(
    duration: float = 20_000.0, lam: float = 0.36, seed: int = 42
) -> list[Request]:
    cfg = SynthConfig(
        lam=lam,
        short_fraction=0.63,
        short_len_dist=LengthDist.uniform(16, 255),
        long_len_dist=LengthDist.uniform(512, 1536),
        slo_offset=400.0,
        seed=seed,
    )
    return synth_stream(cfg, duration)


def offered_load(
    requests: Sequence[Request], cost: CostParams, n_instances: int
) -> float:
    """Unbatched work per instance-millisecond over the arrival span."""
    if len(requests) < 2:
        return 0.0
    work = sum(
        sum(compute_latency(r.new_tokens, r.history_tokens, cost)) for r in requests
    )
    span = requests[-1].arrival_time - requests[0].arrival_time
    return work / (n_instances * span) if span > 0 else 0.0


def check_disaggregation(
    duration: float = 20_000.0,
    seed: int = 42,
    n_instances: int = 8,
    short_instances: int = 2,
    min_load: float = 0.6,
) -> CheckResult:
    """LAPS against data-parallel baselines on one shared request stream.

    The baselines give every instance its own queue and spread arrivals
    round-robin; LAPS keeps one short and one long queue over its pools.
    """
    policies = (Policy.LAPS, Policy.BUCKET_NO_DISAGG, Policy.FCFS_UNIFIED)

    def body() -> tuple[bool, dict[str, Any]]:
        requests = disaggregation_stream(duration, seed=seed)
        base = SimConfig(
            n_instances=n_instances,
            disagg=DisaggMode.SPATIAL,
            short_instances=short_instances,
            duration=duration,
            seed=seed,
        )
        reports: dict[Policy, MetricsReport] = {}
        for policy in policies:
            router = Router.SHARED if policy.dual_queue else Router.ROUND_ROBIN
            sim = replace(base, policy=policy, router=router)
            reports[policy] = run(sim, requests).report
        laps, bucket, fcfs = (reports[p] for p in policies)
        rho = offered_load(requests, CostParams(), n_instances)

        slo = {p.value: reports[p].overall.slo_violation_rate for p in policies}
        ordered = laps.short.ttft_mean < bucket.short.ttft_mean < fcfs.short.ttft_mean
        slo_ok = laps.overall.slo_violation_rate <= min(
            bucket.overall.slo_violation_rate, fcfs.overall.slo_violation_rate
        )
        baseline_violates = any(
            r.overall.slo_violation_rate > 0 for r in (bucket, fcfs)
        )
        passed = rho >= min_load and ordered and slo_ok and baseline_violates
        return passed, {
            "rho": rho,
            "short_mean_ms": {p.value: reports[p].short.ttft_mean for p in policies},
            "short_p90_ms": {p.value: reports[p].short.ttft_p90 for p in policies},
            "slo_violation_rate": slo,
            "ordered": ordered,
        }

    return _timed("disaggregation", body, budget_s=60.0)


WINDOW_LEVELS = (1.0, 5.0, 10.0, 25.0, 50.0, 100.0)


def check_window(
    windows: Sequence[float] = WINDOW_LEVELS,
    clients: int = 64,
    think_time: float = 20.0,
    horizon: float = 5_000.0,
) -> CheckResult:
    """Fixed waiting windows at high short concurrency on one instance."""

    def body() -> tuple[bool, dict[str, Any]]:
        rows = []
        for w in windows:
            source = ClosedLoopSource(
                ClosedLoopConfig(
                    short_clients=clients,
                    long_clients=0,
                    think_time=think_time,
                ),
                horizon=horizon,
            )
            sim = SimConfig(
                n_instances=1, disagg=DisaggMode.TEMPORAL, duration=horizon
            )
            report = run(
                sim, [], sched=SchedConfig(w_min=w, w_max=w), source=source
            ).report
            rows.append(
                {
                    "w_ms": w,
                    "mean_depth": report.batches.mean_depth,
                    "ttft_mean_ms": report.short.ttft_mean,
                    "rps": report.short.rps,
                }
            )
        best_latency = min(rows, key=lambda row: row["ttft_mean_ms"])["w_ms"]
        best_rps = max(rows, key=lambda row: row["rps"])["w_ms"]
        deeper = rows[-1]["mean_depth"] > rows[0]["mean_depth"]
        passed = deeper and best_rps > windows[0] and best_latency < windows[-1]
        return passed, {
            "points": rows,
            "best_latency_w_ms": best_latency,
            "best_rps_w_ms": best_rps,
        }

    return _timed("waiting_window", body)


def phase_stream(
    phases: Sequence[tuple[float, float]], lam: float, seed: int = 42
) -> list[Request]:
    """Concatenate Poisson segments of ``(duration, short_fraction)``."""
    requests: list[Request] = []
    offset = 0.0
    for index, (duration, short_fraction) in enumerate(phases):
        cfg = SynthConfig(
            lam=lam,
            short_fraction=short_fraction,
            short_len_dist=LengthDist.uniform(16, 255),
            long_len_dist=LengthDist.uniform(2048, 4096),
            slo_offset=400.0,
            seed=seed + index,
        )
        for r in synth_stream(cfg, duration):
            next_id = len(requests)
            requests.append(
                replace(
                    r,
                    id=next_id,
                    session_id=next_id,
                    arrival_time=r.arrival_time + offset,
                    deadline=None if r.deadline is None else r.deadline + offset,
                )
            )
        offset += duration
    return requests


def migration_trace(log: EventLog, n_instances: int, n_short: int) -> list[dict]:
    """Migration times with the pool sizes right after each one."""
    n_s = n_short
    trace = []
    for record in log.of_kind(RecordKind.MIGRATE):
        n_s += 1 if record.reason == "long_to_short" else -1
        trace.append(
            {"time_ms": record.time_ms, "n_short": n_s, "n_long": n_instances - n_s}
        )
    return trace


def check_controller(seed: int = 42, lam: float = 0.07) -> CheckResult:
    """Step from a short-heavy to a long-heavy mix on eight instances."""
    ctrl = ControllerConfig()

    def body() -> tuple[bool, dict[str, Any]]:
        requests = phase_stream([(3_000.0, 0.8), (10_000.0, 0.2)], lam, seed)
        sim = SimConfig(
            n_instances=8,
            disagg=DisaggMode.SPATIAL,
            controller=True,
            short_instances=4,
            duration=13_000.0,
            seed=seed,
        )
        # Short batches launch immediately so queued shorts reflect real backlog.
        sched = SchedConfig(w_min=0.0, w_max=0.0)
        result = run(sim, requests, sched=sched, ctrl=ctrl)
        trace = migration_trace(result.log, sim.n_instances, sim.initial_short)
        times = [m["time_ms"] for m in trace]

        last_tick = math.floor(result.report.active_ms / ctrl.dt) * ctrl.dt
        quiet_from = last_tick - 10 * ctrl.dt
        spaced = all(b - a >= ctrl.t_cool for a, b in zip(times, times[1:]))
        floor_ok = all(min(m["n_short"], m["n_long"]) >= ctrl.n_min for m in trace)
        settled = all(t <= quiet_from for t in times)
        passed = 1 <= len(trace) <= 5 and spaced and floor_ok and settled
        return passed, {
            "migrations": trace,
            "final_split": (
                (trace[-1]["n_short"], trace[-1]["n_long"])
                if trace
                else (sim.initial_short, sim.n_instances - sim.initial_short)
            ),
            "long_p90_ms": result.report.long.ttft_p90,
        }

    return _timed("controller", body)


def check_determinism(duration: float = 5_000.0, seed: int = 42) -> CheckResult:
    def body() -> tuple[bool, dict[str, Any]]:
        requests = disaggregation_stream(duration, lam=0.156, seed=seed)
        sim = SimConfig(
            n_instances=4, controller=True, short_instances=2, duration=duration
        )
        first = run(sim, requests)
        second = run(sim, requests)
        same_log = first.log.to_jsonl() == second.log.to_jsonl()
        same_report = first.report.to_dict() == second.report.to_dict()
        return same_log and same_report, {
            "events": len(first.log),
            "identical_log": same_log,
            "identical_metrics": same_report,
        }

    return _timed("determinism", body)


def check_scheduler_examples() -> CheckResult:
    """Literal window, grid and controller examples."""

    def body() -> tuple[bool, dict[str, Any]]:
        results: dict[str, bool] = {}

        cfg = SchedConfig(w_min=5.0, w_max=50.0, delta=5.0)
        st = AWDState(w=50.0, d=8, s_hat=10.0, r_hat=0.5)
        queue = RequestQueue()
        queue.extend(
            Request(i, i, 1, 64, 0, arrival_time=0.0, deadline=80.0) for i in range(2)
        )
        results["combined_window"] = combined_window(queue, 0.0, st, cfg) == 12.0

        grid = GraphGrid()
        five = [Request(i, i, 1, 50 if i == 0 else 10, 0, 0.0) for i in range(5)]
        shape = nearest_graph(five, grid)
        results["nearest_graph"] = (
            shape is not None and (shape.l_pad, shape.depth) == (64, 8)
        )

        results["aggregate"] = aggregate([float(v) for v in range(1, 11)], 90) == 9.0

        ctrl = ControllerConfig(tau_hyst=0.5, n_min=1)
        state = PoolState.split(8, 4)
        move = decide(10.0, 5.0, state, ctrl, now=0.0)
        results["decide_migrates"] = move is not None and move.target is Pool.SHORT
        results["decide_hysteresis"] = (
            decide(10.0, 9.0, PoolState.split(8, 4), ctrl, now=0.0) is None
        )
        results["decide_cooldown"] = decide(10.0, 5.0, state, ctrl, now=100.0) is None
        return all(results.values()), results

    return _timed("scheduler_examples", body)


CHECKS: dict[str, Callable[..., CheckResult]] = {
    "pk_wait": check_pk,
    "hol_penalty": check_hol,
    "cost_exactness": check_cost_exactness,
    "fitting": check_fitting,
    "interference": check_interference,
    "disaggregation": check_disaggregation,
    "waiting_window": check_window,
    "controller": check_controller,
    "determinism": check_determinism,
    "scheduler_examples": check_scheduler_examples,
}


def run_suite(names: Sequence[str] | None = None) -> list[CheckResult]:
    """Run the named checks (all by default) in a fixed order."""
    selected = list(CHECKS) if not names else list(names)
    unknown = [name for name in selected if name not in CHECKS]
    if unknown:
        raise ConfigError(f"unknown checks {unknown}; choose from {sorted(CHECKS)}")
    return [CHECKS[name]() for name in selected]
