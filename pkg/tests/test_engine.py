"""Tests for the discrete-event simulator."""

from collections import defaultdict

import pytest

from laps_sim.controller import ControllerConfig
from laps_sim.cost_model import CostParams, ExecOverheads
from laps_sim.cost_model.latency import total_latency
from laps_sim.errors import ConfigError, InvariantViolation
from laps_sim.scheduler import SchedConfig, SchedMode
from laps_sim.sim.engine import DisaggMode, Policy, Router, SimConfig, run
from laps_sim.sim.events import RecordKind
from laps_sim.workload import (
    ClosedLoopConfig,
    ClosedLoopSource,
    LengthDist,
    SynthConfig,
    synth_stream,
)

EXAMPLE_COST = CostParams(alpha=1e-5, beta=0.01, gamma_w=0.02, gamma_r=0.002)

SCENARIOS = {
    "laps_spatial": SimConfig(n_instances=3, policy=Policy.LAPS),
    "laps_temporal": SimConfig(
        n_instances=1, policy=Policy.LAPS, disagg=DisaggMode.TEMPORAL
    ),
    "fcfs_unified": SimConfig(n_instances=2, policy=Policy.FCFS_UNIFIED),
    "bucket_no_disagg": SimConfig(n_instances=2, policy=Policy.BUCKET_NO_DISAGG),
    "disagg_only": SimConfig(n_instances=2, policy=Policy.DISAGG_ONLY),
    "fcfs_round_robin": SimConfig(
        n_instances=2, policy=Policy.FCFS_UNIFIED, router=Router.ROUND_ROBIN
    ),
    "bucket_least_loaded": SimConfig(
        n_instances=2, policy=Policy.BUCKET_NO_DISAGG, router=Router.LEAST_LOADED
    ),
}


@pytest.fixture(scope="module")
def mixed_stream():
    cfg = SynthConfig(
        lam=0.05,
        short_fraction=0.63,
        long_len_dist=LengthDist.uniform(300, 1500),
        turns_per_session=LengthDist.uniform(1, 3),
        seed=9,
    )
    return synth_stream(cfg, 4000.0)


def dispatch_times(log):
    first = {}
    for record in log.of_kind(RecordKind.DISPATCH):
        for request_id in record.request_ids:
            first.setdefault(request_id, record.time_ms)
    return first


def busy_spans(log):
    """``(start, end)`` of every batch on a single-instance run."""
    starts = [r.time_ms for r in log.of_kind(RecordKind.DISPATCH)]
    ends = [r.time_ms for r in log.of_kind(RecordKind.COMPLETE)]
    assert len(starts) == len(ends)
    return list(zip(starts, ends))


def idle_with_backlog(log, n_instances, routed):
    """Records after which an idle instance still had queued work."""
    busy = set()
    queued = defaultdict(int)
    records = list(log)
    gaps = []
    for index, record in enumerate(records):
        if record.kind == "arrival":
            queued[record.instance if routed else None] += 1
        elif record.kind == "dispatch":
            queued[record.instance if routed else None] -= len(record.request_ids)
            busy.add(record.instance)
        elif record.kind == "complete":
            busy.discard(record.instance)
        following = records[index + 1] if index + 1 < len(records) else None
        for instance in range(n_instances):
            if instance in busy or queued[instance if routed else None] == 0:
                continue
            if following is None or following.kind != "dispatch":
                gaps.append(record)
    return gaps


class TestSingleRequest:
    def test_empty_stream(self):
        result = run(SimConfig(), [])
        assert result.report.completions == 0
        assert result.report.overall.rps == 0.0
        assert len(result.log) == 0

    def test_worked_ttft(self, make_request):
        sim = SimConfig(n_instances=1, policy=Policy.FCFS_UNIFIED)
        result = run(
            sim,
            [make_request(0, 100)],
            cost=EXAMPLE_COST,
            overheads=ExecOverheads(kappa_std=0.5),
            sched=SchedConfig(fcfs_max_batch=1),
        )
        assert result.report.overall.ttft_mean == pytest.approx(3.6)

    def test_long_request_runs_in_chunks(self, params, make_request):
        result = run(SimConfig(n_instances=2), [make_request(0, 1000)], cost=params)
        chunks = result.log.of_kind(RecordKind.DISPATCH)
        dispatched = [(c.reason, c.tokens) for c in chunks]
        assert dispatched == [("chunk", 512), ("chunk", 488)]
        expected = (
            2 * 0.5 + total_latency(512, 0, params) + total_latency(488, 512, params)
        )
        assert result.report.long.ttft_mean == pytest.approx(expected)
        (complete, last) = result.log.of_kind(RecordKind.COMPLETE)
        assert complete.finished == ()
        assert last.finished == (0,)

    def test_graph_capture_delays_first_dispatch(self, make_request):
        sim = SimConfig(n_instances=2, capture_startup_ms=10.0)
        result = run(sim, [make_request(0, 50)])
        (dispatch,) = result.log.of_kind(RecordKind.DISPATCH)
        assert dispatch.time_ms >= 10.0
        assert dispatch.kernel == "graph"


class TestInvariants:
    @pytest.mark.parametrize("name", sorted(SCENARIOS))
    def test_conservation_and_causality(self, name, mixed_stream):
        result = run(SCENARIOS[name], mixed_stream)
        assert result.report.arrivals == len(mixed_stream)
        assert result.report.completions == len(mixed_stream)

        arrival = {r.id: r.arrival_time for r in mixed_stream}
        for request_id, t in dispatch_times(result.log).items():
            assert t >= arrival[request_id]
        dispatched_at = defaultdict(list)
        for record in result.log.of_kind(RecordKind.DISPATCH):
            dispatched_at[record.instance].append(record.time_ms)
        for record in result.log.of_kind(RecordKind.COMPLETE):
            assert any(t <= record.time_ms for t in dispatched_at[record.instance])

    @pytest.mark.parametrize("name", ["laps_spatial", "laps_temporal", "disagg_only"])
    def test_classes_never_share_a_batch(self, name, mixed_stream):
        result = run(SCENARIOS[name], mixed_stream)
        for record in result.log.of_kind(RecordKind.DISPATCH):
            assert record.klass in ("short", "long")

    def test_unified_policies_mix_classes(self):
        busy = synth_stream(SynthConfig(lam=0.2, seed=2), 2000.0)
        result = run(SCENARIOS["fcfs_unified"], busy)
        kinds = {r.klass for r in result.log.of_kind(RecordKind.DISPATCH)}
        assert "mixed" in kinds

    def test_long_chunks_are_contiguous(self, mixed_stream):
        result = run(SCENARIOS["laps_temporal"], mixed_stream)
        running = None
        for record in result.log:
            if record.kind == "dispatch":
                if running is not None:
                    assert record.reason == "chunk"
                    assert record.request_ids == (running,)
                elif record.reason == "chunk":
                    (running,) = record.request_ids
            elif record.kind == "complete" and running in record.finished:
                running = None

    def test_single_job_batches(self, mixed_stream):
        sim = SimConfig(n_instances=1, policy=Policy.FCFS_UNIFIED)
        result = run(sim, mixed_stream, sched=SchedConfig(fcfs_max_batch=1))
        for record in result.log.of_kind(RecordKind.DISPATCH):
            assert len(record.request_ids) == 1

    def test_replay_is_identical(self, mixed_stream):
        first = run(SCENARIOS["laps_spatial"], mixed_stream)
        second = run(SCENARIOS["laps_spatial"], mixed_stream)
        assert first.log.to_jsonl() == second.log.to_jsonl()
        assert first.report.to_dict() == second.report.to_dict()

    def test_unsorted_requests(self, make_request):
        with pytest.raises(InvariantViolation):
            run(SimConfig(), [make_request(0, 10, arrival=5.0), make_request(1, 10)])

    def test_duplicate_ids(self, make_request):
        requests = [make_request(0, 10), make_request(0, 10, arrival=1.0)]
        with pytest.raises(InvariantViolation):
            run(SimConfig(), requests)


class TestRouting:
    def test_round_robin_cycles_instances(self, make_request):
        sim = SimConfig(
            n_instances=2, policy=Policy.FCFS_UNIFIED, router=Router.ROUND_ROBIN
        )
        requests = [make_request(i, 64, arrival=10.0 * i) for i in range(5)]
        result = run(sim, requests)
        routed = [r.instance for r in result.log.of_kind(RecordKind.ARRIVAL)]
        assert routed == [0, 1, 0, 1, 0]

    def test_least_loaded_prefers_idle_then_lowest_id(self, make_request):
        sim = SimConfig(
            n_instances=2, policy=Policy.FCFS_UNIFIED, router=Router.LEAST_LOADED
        )
        requests = [make_request(i, 64) for i in range(3)]
        result = run(sim, requests)
        routed = [r.instance for r in result.log.of_kind(RecordKind.ARRIVAL)]
        assert routed == [0, 1, 0]

    @pytest.mark.parametrize("name", ["fcfs_round_robin", "bucket_least_loaded"])
    def test_requests_stay_on_their_instance(self, name, mixed_stream):
        result = run(SCENARIOS[name], mixed_stream)
        owner = {
            r.request_ids[0]: r.instance for r in result.log.of_kind(RecordKind.ARRIVAL)
        }
        for record in result.log.of_kind(RecordKind.DISPATCH):
            assert {owner[i] for i in record.request_ids} == {record.instance}

    def test_shared_router_logs_no_instance(self, mixed_stream):
        result = run(SCENARIOS["fcfs_unified"], mixed_stream)
        arrivals = result.log.of_kind(RecordKind.ARRIVAL)
        assert {r.instance for r in arrivals} == {None}

    def test_routing_needs_unified_policy(self):
        with pytest.raises(ConfigError):
            SimConfig(n_instances=2, policy=Policy.LAPS, router=Router.ROUND_ROBIN)


class TestWorkConservation:
    @pytest.mark.parametrize(
        "router", [Router.SHARED, Router.ROUND_ROBIN, Router.LEAST_LOADED]
    )
    def test_fcfs_never_idles_with_own_backlog(self, router, mixed_stream):
        sim = SimConfig(n_instances=2, policy=Policy.FCFS_UNIFIED, router=router)
        result = run(sim, mixed_stream)
        routed = router != Router.SHARED
        assert idle_with_backlog(result.log, 2, routed) == []


class TestShortBatchTiming:
    def test_sla_dispatch_not_after_deadline_when_free(self):
        sigma = SchedConfig().sigma
        stream = synth_stream(
            SynthConfig(
                lam=0.05,
                short_fraction=0.63,
                long_len_dist=LengthDist.uniform(300, 1500),
                slo_offset=40.0,
                seed=9,
            ),
            4000.0,
        )
        sim = SimConfig(n_instances=1, disagg=DisaggMode.TEMPORAL)
        result = run(sim, stream)
        spans = busy_spans(result.log)
        first = dispatch_times(result.log)
        for arrival in result.log.of_kind(RecordKind.ARRIVAL):
            if arrival.klass != "short":
                continue
            latest = arrival.deadline_ms - sigma + 1e-6
            (request_id,) = arrival.request_ids
            if first[request_id] <= latest:
                continue
            assert any(start <= latest < end for start, end in spans)
        assert result.report.completions == len(stream)

    def test_member_wait_bounded_by_cap_plus_one_service(self):
        sched = SchedConfig()
        stream = synth_stream(
            SynthConfig(
                lam=0.05, short_fraction=1.0, short_len_dist=LengthDist.fixed(128)
            ),
            10_000.0,
        )
        sim = SimConfig(n_instances=1, disagg=DisaggMode.TEMPORAL)
        result = run(sim, stream, sched=sched)
        longest_service = max(end - start for start, end in busy_spans(result.log))
        bound = max(sched.w_max, sched.t_max) + longest_service + 1e-6
        first = dispatch_times(result.log)
        for r in stream:
            assert first[r.id] - r.arrival_time <= bound

    def test_batch_depth_within_shape(self, mixed_stream):
        result = run(SCENARIOS["laps_spatial"], mixed_stream)
        for record in result.log.of_kind(RecordKind.DISPATCH):
            assert len(record.request_ids) <= record.depth


class TestDeadlineFree:
    def test_lone_request_dispatches_at_hol_cap(self, make_request):
        arrival = 32717.22538608876
        sched = SchedConfig(mode=SchedMode.DEADLINE_FREE)
        sim = SimConfig(n_instances=1, disagg=DisaggMode.TEMPORAL)
        result = run(sim, [make_request(0, 64, arrival=arrival)], sched=sched)
        assert result.report.completions == 1
        (dispatch,) = result.log.of_kind(RecordKind.DISPATCH)
        assert dispatch.reason == "hol_cap"
        assert dispatch.time_ms == pytest.approx(arrival + sched.t_max)

    def test_token_max_or_hol_cap_only(self, mixed_stream):
        sched = SchedConfig(mode=SchedMode.DEADLINE_FREE)
        result = run(SCENARIOS["laps_spatial"], mixed_stream, sched=sched)
        assert result.report.completions == len(mixed_stream)
        arrival = {r.id: r.arrival_time for r in mixed_stream}
        for record in result.log.of_kind(RecordKind.DISPATCH):
            if record.reason == "token_max":
                assert record.tokens >= sched.m_s
            elif record.reason == "hol_cap":
                head = record.request_ids[0]
                assert record.time_ms - arrival[head] >= sched.t_max - 1e-6
            else:
                assert record.reason == "chunk"


class TestController:
    def test_all_short_load_shrinks_long_pool_to_floor(self):
        sim = SimConfig(n_instances=4, short_instances=1, controller=True)
        ctrl = ControllerConfig(n_min=1, t_cool=500.0)
        stream = synth_stream(
            SynthConfig(
                lam=1.5, short_fraction=1.0, short_len_dist=LengthDist.fixed(200)
            ),
            2000.0,
        )
        result = run(sim, stream, ctrl=ctrl)
        moves = result.log.of_kind(RecordKind.MIGRATE)
        assert [m.reason for m in moves] == ["long_to_short", "long_to_short"]
        assert moves[1].time_ms - moves[0].time_ms >= ctrl.t_cool
        assert result.report.completions == len(stream)

    def test_no_migrations_without_controller(self, mixed_stream):
        result = run(SCENARIOS["laps_spatial"], mixed_stream)
        assert result.log.of_kind(RecordKind.MIGRATE) == []


class TestClosedLoop:
    def test_clients_resubmit_until_horizon(self):
        source = ClosedLoopSource(
            ClosedLoopConfig(short_clients=4, long_clients=1), horizon=500.0
        )
        sim = SimConfig(n_instances=1, policy=Policy.FCFS_UNIFIED, duration=500.0)
        result = run(sim, [], source=source)
        assert result.report.arrivals > 5
        assert result.report.completions == result.report.arrivals
        assert result.report.long.count >= 1


class TestSimConfig:
    def test_temporal_needs_one_instance(self):
        with pytest.raises(ConfigError):
            SimConfig(n_instances=2, disagg=DisaggMode.TEMPORAL)

    def test_spatial_needs_two(self):
        with pytest.raises(ConfigError):
            SimConfig(n_instances=1)

    def test_controller_needs_pools(self):
        with pytest.raises(ConfigError):
            SimConfig(policy=Policy.FCFS_UNIFIED, controller=True)

    def test_short_pool_bounds(self):
        with pytest.raises(ConfigError):
            SimConfig(n_instances=4, short_instances=4)

    def test_default_split(self):
        assert SimConfig(n_instances=5).initial_short == 2

    def test_controller_floor_checked(self):
        sim = SimConfig(n_instances=2, controller=True)
        with pytest.raises(ConfigError):
            run(sim, [], ctrl=ControllerConfig(n_min=2))
