"""Tests for the captured-shape grid."""

import pytest

from laps_sim.cost_model import KernelKind
from laps_sim.errors import ConfigError
from laps_sim.scheduler import GraphGrid, bucket_of, nearest_graph, shape_for
from laps_sim.scheduler.grid import MB


class TestGraphGrid:
    def test_defaults(self):
        grid = GraphGrid()
        assert grid.max_length == 256
        assert grid.max_depth == 64
        assert grid.capturable

    @pytest.mark.parametrize(
        "depth,expected", [(1, 1), (3, 4), (5, 8), (64, 64), (100, 64)]
    )
    def test_next_depth(self, depth, expected):
        assert GraphGrid().next_depth(depth) == expected

    def test_presets(self):
        assert GraphGrid.for_model("14B").mem_per_graph == 240 * MB
        with pytest.raises(ConfigError):
            GraphGrid.for_model("70b")

    def test_lengths_must_increase(self):
        with pytest.raises(ConfigError):
            GraphGrid(lengths=(16, 8))
        with pytest.raises(ConfigError):
            GraphGrid(depths=())

    def test_budget_below_one_graph(self):
        assert not GraphGrid(mem_budget=100 * MB).capturable


class TestBucketOf:
    @pytest.mark.parametrize(
        "L,bucket", [(1, 8), (8, 8), (9, 16), (200, 256), (256, 256)]
    )
    def test_smallest_covering_length(self, L, bucket):
        assert bucket_of(L, GraphGrid()) == bucket

    def test_past_grid(self):
        assert bucket_of(257, GraphGrid()) is None

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            bucket_of(0, GraphGrid())


class TestNearestGraph:
    def test_five_requests(self, make_request):
        five = [make_request(i, 50 if i == 0 else 10) for i in range(5)]
        shape = nearest_graph(five, GraphGrid())
        assert (shape.l_pad, shape.depth, shape.kind) == (64, 8, KernelKind.GRAPH)

    def test_minimizes_padding_over_length_and_depth(self, make_request):
        grid = GraphGrid(lengths=(16, 32), depths=(1, 2, 4))
        batch = [make_request(i, 12) for i in range(3)]
        shape = nearest_graph(batch, grid)
        assert (shape.l_pad, shape.depth) == (16, 4)

    def test_no_shape_large_enough(self, make_request):
        grid = GraphGrid(lengths=(8, 16), depths=(1, 2))
        assert nearest_graph([make_request(i, 4) for i in range(3)], grid) is None
        assert nearest_graph([make_request(0, 17)], grid) is None

    def test_not_capturable(self, make_request):
        grid = GraphGrid(mem_budget=0)
        assert nearest_graph([make_request(0, 10)], grid) is None

    def test_empty_candidate(self):
        with pytest.raises(ValueError):
            nearest_graph([], GraphGrid())


class TestShapeFor:
    def test_falls_back_to_standard(self, make_request):
        batch = [make_request(0, 300), make_request(1, 20)]
        shape = shape_for(batch, GraphGrid())
        assert (shape.l_pad, shape.depth, shape.kind) == (300, 2, KernelKind.STANDARD)

    def test_graphs_disabled(self, make_request):
        shape = shape_for([make_request(0, 10)], GraphGrid(), use_graphs=False)
        assert (shape.l_pad, shape.depth, shape.kind) == (10, 1, KernelKind.STANDARD)
