"""Acceptance checks: oracle agreement, interference, batching and control."""

import numpy as np
import pytest

from laps_sim.errors import ConfigError
from laps_sim.sim.events import EventLog, RecordKind
from laps_sim.validation import (
    CHECKS,
    CheckResult,
    batch_means,
    check_controller,
    check_cost_exactness,
    check_determinism,
    check_disaggregation,
    check_fitting,
    check_hol,
    check_interference,
    check_pk,
    check_scheduler_examples,
    check_window,
    migration_trace,
    phase_stream,
    queue_waits,
    run_suite,
    two_point_stream,
)


class TestHelpers:
    def test_two_point_stream(self):
        requests = two_point_stream(
            1000, lam=0.25, p_short=0.5, short_tokens=1, long_tokens=3, seed=1
        )
        assert {r.new_tokens for r in requests} == {1, 3}
        times = [r.arrival_time for r in requests]
        assert times == sorted(times)
        assert np.mean([r.new_tokens == 1 for r in requests]) == pytest.approx(
            0.5, abs=0.05
        )

    def test_queue_waits_use_first_dispatch(self):
        log = EventLog()
        log.append(0.0, RecordKind.ARRIVAL, request_ids=(0,))
        log.append(1.0, RecordKind.ARRIVAL, request_ids=(1,))
        log.append(2.0, RecordKind.DISPATCH, instance=0, request_ids=(0, 1))
        log.append(5.0, RecordKind.DISPATCH, instance=0, request_ids=(1,))
        assert list(queue_waits(log)) == [2.0, 1.0]

    def test_batch_means(self):
        mean, half_width = batch_means(np.ones(100))
        assert (mean, half_width) == (1.0, 0.0)
        with pytest.raises(ConfigError):
            batch_means(np.ones(5))

    def test_phase_stream_is_contiguous(self):
        requests = phase_stream([(1000.0, 1.0), (1000.0, 0.0)], lam=0.05)
        assert [r.id for r in requests] == list(range(len(requests)))
        first = [r for r in requests if r.arrival_time < 1000.0]
        second = [r for r in requests if r.arrival_time >= 1000.0]
        assert all(r.new_tokens <= 255 for r in first)
        assert all(r.new_tokens >= 2048 for r in second)

    def test_budget_flag(self):
        assert CheckResult("a", True, elapsed_s=2.0).within_budget
        assert CheckResult("a", True, elapsed_s=2.0, budget_s=5.0).within_budget
        assert not CheckResult("a", True, elapsed_s=6.0, budget_s=5.0).within_budget

    def test_migration_trace(self):
        log = EventLog()
        log.append(100.0, RecordKind.MIGRATE, instance=3, reason="long_to_short")
        log.append(700.0, RecordKind.MIGRATE, instance=0, reason="short_to_long")
        trace = migration_trace(log, n_instances=4, n_short=2)
        assert [(m["n_short"], m["n_long"]) for m in trace] == [(3, 1), (2, 2)]


class TestFastChecks:
    def test_cost_exactness(self):
        assert check_cost_exactness().passed

    def test_fitting(self):
        result = check_fitting()
        assert result.passed, result.details

    def test_scheduler_examples(self):
        result = check_scheduler_examples()
        assert result.passed, result.details

    def test_unknown_check(self):
        with pytest.raises(ConfigError):
            run_suite(["nope"])

    def test_suite_subset_in_order(self):
        results = run_suite(["scheduler_examples", "cost_exactness"])
        assert [r.name for r in results] == ["scheduler_examples", "cost_exactness"]

    def test_every_check_registered(self):
        assert len(CHECKS) == 10


@pytest.mark.slow
class TestAcceptance:
    def test_pk_wait(self):
        result = check_pk()
        assert result.passed, result.details
        assert result.details["predicted_ms"] == pytest.approx(1.25)
        assert result.budget_s == 10.0

    def test_hol_penalty(self):
        result = check_hol()
        assert result.passed, result.details
        details = result.details
        assert details["deterministic_wait_ms"] < details["mixed_wait_ms"]
        assert set(details) == {
            "predicted_ms",
            "measured_ms",
            "rel_error",
            "mixed_wait_ms",
            "deterministic_wait_ms",
        }

    def test_interference(self):
        result = check_interference()
        assert result.passed, result.details
        short_p90 = result.details["short_p90_ms"]
        assert short_p90 == sorted(short_p90)
        assert short_p90[-1] > result.details["short_only_p90_ms"]
        assert result.within_budget, result.elapsed_s

    def test_disaggregation(self):
        result = check_disaggregation()
        assert result.passed, result.details
        details = result.details
        assert details["rho"] >= 0.6
        short = details["short_mean_ms"]
        assert short["laps"] < short["bucket_no_disagg"] < short["fcfs_unified"]
        slo = details["slo_violation_rate"]
        assert slo["laps"] <= min(slo["bucket_no_disagg"], slo["fcfs_unified"])
        assert max(slo.values()) > 0
        assert result.within_budget, result.elapsed_s

    def test_waiting_window(self):
        result = check_window()
        assert result.passed, result.details
        assert result.details["best_rps_w_ms"] > 1.0
        assert result.details["best_latency_w_ms"] < 100.0

    def test_controller(self):
        result = check_controller()
        assert result.passed, result.details

    def test_determinism(self):
        assert check_determinism().passed
