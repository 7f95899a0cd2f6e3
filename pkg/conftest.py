"""
Shared fixtures for the policyflow test files.
"""

import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from src.graph_core import LabeledDigraph, build_graph, load_graph
from src.policy_lang import PolicyNfa, load_nfa, preset

DATA_DIR = Path(__file__).parent / "data"

settings.register_profile(
    "ci",
    max_examples=100,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("fast", max_examples=20, deadline=None)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "ci"))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: large randomized or performance checks")


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def vf_triangle() -> LabeledDigraph:
    """B provides transit to A and C; A and C peer. Edge ids 0..5 follow the file order."""
    return load_graph(DATA_DIR / "vf_triangle.txt")


@pytest.fixture
def valley_free() -> PolicyNfa:
    return preset("valley-free")[1]


@pytest.fixture
def chain_graph() -> LabeledDigraph:
    return build_graph({"a"}, [("v1", "v2", "a", 1), ("v2", "v3", "a", 1)])


@pytest.fixture
def chain_nfa() -> PolicyNfa:
    return load_nfa(DATA_DIR / "chain.nfa")
