"""Tests for SLA and graph waiting windows."""

import pytest

from laps_sim.scheduler import (
    AWDState,
    RequestQueue,
    SchedConfig,
    combined_window,
    graph_window,
    sla_window,
)


@pytest.fixture
def cfg():
    return SchedConfig(w_min=5.0, w_max=50.0, delta=5.0)


@pytest.fixture
def st():
    return AWDState(w=50.0, d=8, s_hat=10.0, r_hat=0.5)


def queue_of(*requests):
    queue = RequestQueue()
    queue.extend(requests)
    return queue


class TestSlaWindow:
    def test_tightest_deadline(self, cfg, st, make_request):
        queue = queue_of(
            make_request(0, 64, slo=80.0), make_request(1, 64, arrival=10.0, slo=200.0)
        )
        assert sla_window(queue, 20.0, st, cfg) == pytest.approx(80 - 20 - 10 - 5)

    def test_never_negative(self, cfg, st, make_request):
        queue = queue_of(make_request(0, 64, slo=10.0))
        assert sla_window(queue, 5.0, st, cfg) == 0.0

    def test_no_deadlines_means_w_max(self, cfg, st, make_request):
        queue = queue_of(make_request(0, 64, slo=None))
        assert sla_window(queue, 0.0, st, cfg) == cfg.w_max


class TestGraphWindow:
    def test_missing_slots_over_rate(self, cfg, st):
        assert graph_window(st, 2, cfg) == pytest.approx(12.0)

    def test_full_batch(self, cfg, st):
        assert graph_window(st, 8, cfg) == 0.0

    def test_zero_rate_uses_epsilon(self, cfg):
        idle = AWDState(w=50.0, d=4, s_hat=1.0, r_hat=0.0)
        assert graph_window(idle, 3, cfg) == pytest.approx(1 / cfg.epsilon)


class TestCombinedWindow:
    def test_two_requests_example(self, cfg, st, make_request):
        queue = queue_of(make_request(0, 64, slo=80.0), make_request(1, 64, slo=80.0))
        assert combined_window(queue, 0.0, st, cfg) == 12.0

    def test_clipped_to_bounds(self, cfg, st, make_request):
        tight = queue_of(make_request(0, 64, slo=12.0))
        assert combined_window(tight, 0.0, st, cfg) == cfg.w_min
        idle = AWDState(w=50.0, d=8, s_hat=1.0, r_hat=0.0)
        loose = queue_of(make_request(0, 64, slo=None))
        assert combined_window(loose, 0.0, idle, cfg) == cfg.w_max

    def test_explicit_depth(self, cfg, st, make_request):
        queue = queue_of(*(make_request(i, 64, slo=1000.0) for i in range(6)))
        window = combined_window(queue, 0.0, st, cfg, current_depth=4)
        assert window == pytest.approx(8.0)
