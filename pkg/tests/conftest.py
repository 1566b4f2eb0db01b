"""Shared fixtures: the six-node walkthrough network and small random helpers."""

import itertools

import numpy as np
import pytest

from quboroute import make_instance


def six_node(r1=3, r3=2):
    """Six-node field with one relay hub, two streams, sink at node 6.

    Stream sources sit at nodes 1 and 3. Each has exactly two simple routes
    to the sink and the two-hop routes share the hub-to-sink edge, so that
    edge carries r1 + r3 when both streams pick their shortest route.
    """
    return make_instance(
        nodes=[(1, (0.0, 60.0)), (2, (40.0, 60.0)), (3, (40.0, 20.0)),
               (4, (10.0, 90.0)), (5, (85.0, 10.0)), (6, (80.0, 60.0))],
        edges=[(1, 2), (2, 6), (2, 3), (4, 2), (3, 5), (5, 6)],
        sink=6,
        streams=[(1, r1), (3, r3)],
    )


@pytest.fixture
def walkthrough():
    return six_node()


@pytest.fixture
def walkthrough_tight():
    """Same field with rates that overload the shared edge's worst case."""
    return six_node(r1=3, r3=3)


def random_instance(rng, n_max=6, n_streams_max=3, r_max=5, p=0.7):
    """One random connected instance for property tests."""
    n = int(rng.integers(4, n_max + 1))
    ids = list(range(1, n + 1))
    while True:
        coords = rng.uniform(0.0, 100.0, (n, 2))
        edges = [pair for pair in itertools.combinations(ids, 2) if rng.random() < p]
        seen = set()
        stack = [1]
        adj = {i: [] for i in ids}
        for u, v in edges:
            adj[u].append(v)
            adj[v].append(u)
        while stack:
            x = stack.pop()
            if x in seen:
                continue
            seen.add(x)
            stack.extend(adj[x])
        if len(seen) == n:
            break
    k = int(rng.integers(1, n_streams_max + 1))
    sources = list(rng.choice(ids[:-1], size=min(k, n - 1), replace=False))
    streams = [(int(s), int(rng.integers(1, r_max + 1))) for s in sorted(sources)]
    nodes = [(ids[i], (float(coords[i, 0]), float(coords[i, 1]))) for i in range(n)]
    return make_instance(nodes, edges, ids[-1], streams)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


ACCEPTANCE_VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion, after the test listing."""
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance verdicts")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)
