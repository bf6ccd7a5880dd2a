"""Shared fixtures: the reference four-vertex loop network and random
matrix/digraph generators used by the property suites."""

from __future__ import annotations

import numpy as np
import pytest

import circnet as cn


def make_demo_spec() -> cn.NetworkSpec:
    """Four stocks in a loop with two alternating time-varying feeds.

    At integer times only the 1->3 feed is active, at half-integer times
    only 1->2; in between both run and the digraph has two cycles.
    """
    return cn.NetworkSpec(
        n_v=4,
        stocks=(cn.Constant(10), cn.Constant(20), cn.Constant(15), cn.Constant(5)),
        flows=(
            cn.FlowEntry(1, 2, cn.Expression.parse("abs(sin(pi*t))")),
            cn.FlowEntry(1, 3, cn.Expression.parse("abs(cos(pi*t))")),
            cn.FlowEntry(2, 3, cn.Constant(4)),
            cn.FlowEntry(3, 4, cn.Constant(7)),
            cn.FlowEntry(4, 1, cn.Constant(1.3)),
        ),
        time_window=cn.TimeWindow(0, 2, 201),
    )


@pytest.fixture
def demo_spec() -> cn.NetworkSpec:
    return make_demo_spec()


def random_matrix(rng: np.random.Generator, n_v: int, density: float = 0.35) -> cn.MassFlowMatrix:
    """Random valid matrix: sparse positive flows, positive stocks."""
    grid = np.zeros((n_v, n_v))
    for i in range(n_v):
        grid[i, i] = rng.uniform(0.0, 50.0)
        for j in range(n_v):
            if i != j and rng.random() < density:
                grid[i, j] = rng.uniform(0.1, 10.0)
    return cn.validate_matrix(grid)


def random_digraph(rng: np.random.Generator, n_v: int, density: float = 0.35) -> cn.MassFlowDigraph:
    return cn.build_digraph(random_matrix(rng, n_v, density))


def cycle_arc_sets(cycles) -> set[frozenset]:
    """Cycle identity is its arc set; handy for comparing enumerations."""
    return {frozenset(c.arcs) for c in cycles}


def report_values(report: cn.IndicatorReport) -> np.ndarray:
    """Report as the canonical numeric row (NaN for undefined)."""
    scalars = [np.nan if v is None else float(v) for v in report.scalar_values()]
    return np.array(scalars + list(report.theta_a))
