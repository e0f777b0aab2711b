"""Shared fixtures and Hypothesis strategies."""

import numpy as np
import pytest
from hypothesis import strategies as st

from qflow.space import cycle_graph, grid_graph, path_graph

exponent_p = st.sampled_from([1.25, 1.5, 1.8, 2.2, 2.5, 2.9])
exponent_q = st.sampled_from([1.3, 1.5, 1.7, 2.0, 2.5, 3.0, 4.0])
seeds = st.integers(min_value=0, max_value=2**31 - 1)


def small_space(kind: str, n: int):
    if kind == "path":
        return path_graph(n)
    if kind == "cycle":
        return cycle_graph(max(n, 3))
    side = max(2, int(round(np.sqrt(n))))
    return grid_graph(side, side)


spaces = st.builds(small_space, st.sampled_from(["path", "cycle", "grid"]),
                   st.integers(min_value=2, max_value=12))


def positive_density(rng, space, low=0.2):
    f = low + rng.random(space.n)
    return f / space.integrate(f)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def two_point():
    """Two vertices at distance 1 with measure (1/2, 1/2) and unit conductance."""
    return path_graph(2, length=1.0, measure=[0.5, 0.5], conductance=1.0)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import VERDICTS
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
