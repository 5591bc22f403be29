"""
Configuration for pytest
"""

import os
import sys

import pytest

# Add project root and src to Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
src_root = os.path.join(project_root, "src")
sys.path.insert(0, project_root)
sys.path.insert(0, src_root)

from laps_sim.cost_model import CostParams, ExecOverheads  # noqa: E402
from laps_sim.workload import Request  # noqa: E402


def _make_request(
    request_id, new_tokens, arrival=0.0, history=0, session=None, turn=1, slo=400.0
):
    """Single-turn request with a deadline ``slo`` ms after arrival."""
    return Request(
        id=request_id,
        session_id=request_id if session is None else session,
        turn=turn,
        new_tokens=new_tokens,
        history_tokens=history,
        arrival_time=arrival,
        deadline=None if slo is None else arrival + slo,
    )


@pytest.fixture
def make_request():
    return _make_request


@pytest.fixture
def params():
    """Default coefficients; first-turn boundary near 256 tokens."""
    return CostParams()


@pytest.fixture
def no_overheads():
    """Plain summed latencies: no launch cost, no batching discount."""
    return ExecOverheads(kappa_graph=0.0, kappa_std=0.0, eta=1.0)


@pytest.fixture
def test_data_dir(tmp_path_factory):
    """Create a temporary directory for test data"""
    return tmp_path_factory.mktemp("test_data")
