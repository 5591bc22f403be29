"""Tests for adaptive wait/depth batching."""

import pytest

from laps_sim.scheduler import (
    AWDState,
    DispatchReason,
    GraphGrid,
    RequestQueue,
    SchedConfig,
    SchedMode,
    awd_step,
    awd_wakeup,
    observe_service,
)
from laps_sim.scheduler.awd import after_dispatch, begin_round


def queue_of(*requests):
    queue = RequestQueue()
    queue.extend(requests)
    return queue


@pytest.fixture
def grid():
    return GraphGrid()


@pytest.fixture
def cfg():
    return SchedConfig(w_min=1.0, w_max=50.0, sigma=10.0, delta=5.0, t_max=100.0)


class TestAwdStep:
    def test_empty_queue(self, grid, cfg):
        st = AWDState.initial(cfg, grid)
        assert awd_step(st, RequestQueue(), 0.0, grid, cfg) == (None, st)

    def test_depth_reached(self, grid, cfg, make_request):
        st = AWDState(w=50.0, d=2, s_hat=1.0, r_hat=0.0)
        queue = queue_of(make_request(0, 10), make_request(1, 12))
        plan, new = awd_step(st, queue, 0.0, grid, cfg)
        assert plan.reason == DispatchReason.DEPTH_REACHED
        assert plan.members == (0, 1)
        assert (plan.shape.l_pad, plan.shape.depth) == (16, 2)
        # Filled instantly, so W drops to the floor.
        assert new.w == cfg.w_min
        assert new.d == 2
        assert new.round_start is None

    def test_window_expiry_shrinks_depth(self, grid, cfg, make_request):
        st = AWDState(w=50.0, d=8, s_hat=1.0, r_hat=0.0)
        queue = queue_of(make_request(0, 10))
        plan, waiting = awd_step(st, queue, 0.0, grid, cfg)
        assert plan is None
        assert waiting.round_start == 0.0
        assert awd_wakeup(waiting, queue, 0.0, grid, cfg) == pytest.approx(50.0)

        plan, new = awd_step(waiting, queue, 50.0, grid, cfg)
        assert plan.reason == DispatchReason.WINDOW_EXPIRED
        assert new.d == 1
        assert new.w == 50.0

    def test_sla_break_before_window(self, grid, cfg, make_request):
        st = AWDState(w=50.0, d=8, s_hat=1.0, r_hat=0.0)
        queue = queue_of(make_request(0, 10, slo=15.0))
        plan, waiting = awd_step(st, queue, 0.0, grid, cfg)
        assert plan is None
        plan, _ = awd_step(waiting, queue, 4.5, grid, cfg)
        assert plan.reason == DispatchReason.SLA_BREAK

    def test_head_of_line_cap(self, grid, make_request):
        cfg = SchedConfig(w_max=500.0, t_max=100.0, mode=SchedMode.DEADLINE_FREE)
        st = AWDState(w=500.0, d=8, s_hat=1.0, r_hat=0.0)
        queue = queue_of(make_request(0, 10, slo=None))
        plan, waiting = awd_step(st, queue, 99.0, grid, cfg)
        assert plan is None
        assert awd_wakeup(waiting, queue, 99.0, grid, cfg) == pytest.approx(100.0)
        plan, _ = awd_step(waiting, queue, 100.0, grid, cfg)
        assert plan.reason == DispatchReason.HOL_CAP

    def test_deadline_free_ignores_deadlines(self, grid, make_request):
        cfg = SchedConfig(w_max=500.0, t_max=1000.0, mode=SchedMode.DEADLINE_FREE)
        st = AWDState(w=500.0, d=8, s_hat=1.0, r_hat=0.0)
        queue = queue_of(make_request(0, 10, slo=15.0))
        _, waiting = awd_step(st, queue, 0.0, grid, cfg)
        plan, _ = awd_step(waiting, queue, 10.0, grid, cfg)
        assert plan is None

    def test_window_never_grows(self, grid, cfg, make_request):
        st = AWDState(w=20.0, d=2, s_hat=1.0, r_hat=0.0)
        queue = queue_of(make_request(0, 10))
        _, waiting = awd_step(st, queue, 0.0, grid, cfg)
        queue.push(make_request(1, 10, arrival=15.0))
        plan, new = awd_step(waiting, queue, 15.0, grid, cfg)
        assert plan.reason == DispatchReason.DEPTH_REACHED
        assert new.w == pytest.approx(15.0)
        assert new.w <= st.w


class TestRoundBookkeeping:
    def test_depth_recovery_on_backlog(self, grid, cfg, make_request):
        st = AWDState(w=10.0, d=1, s_hat=1.0, r_hat=0.0)
        queue = queue_of(*(make_request(i, 10) for i in range(5)))
        assert begin_round(st, queue, 0.0, grid, cfg).d == 8

    def test_depth_recovery_disabled(self, grid, make_request):
        cfg = SchedConfig(depth_recovery=False)
        st = AWDState(w=10.0, d=1, s_hat=1.0, r_hat=0.0)
        queue = queue_of(*(make_request(i, 10) for i in range(5)))
        assert begin_round(st, queue, 0.0, grid, cfg).d == 1

    def test_open_round_is_kept(self, grid, cfg, make_request):
        st = AWDState(w=10.0, d=1, s_hat=1.0, r_hat=0.0, round_start=3.0)
        queue = queue_of(make_request(0, 10))
        assert begin_round(st, queue, 9.0, grid, cfg) is st

    def test_arrival_rate_estimate(self, cfg, make_request):
        st = AWDState(w=50.0, d=8, s_hat=1.0, r_hat=0.0, round_start=0.0)
        queue = queue_of(
            make_request(0, 10, arrival=0.0),
            make_request(1, 10, arrival=2.0),
            make_request(2, 10, arrival=4.0),
        )
        new = after_dispatch(st, queue, dispatched=3, now=4.0, cfg=cfg)
        assert new.r_hat == pytest.approx(cfg.ewma * 2 / 4.0)
        assert new.d == 3

    def test_service_estimate(self, cfg):
        st = AWDState(w=50.0, d=8, s_hat=5.0, r_hat=0.0)
        new = observe_service(st, service_time=20.0, depth=2, cfg=cfg)
        assert new.s_hat == pytest.approx(0.8 * 5.0 + 0.2 * 10.0)

    def test_initial_state(self, grid):
        st = AWDState.initial(SchedConfig(w_max=30.0, d_init=5), grid)
        assert (st.w, st.d, st.round_start) == (30.0, 5, None)
