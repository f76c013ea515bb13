import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from graphgreen.graph import WeightedGraph

settings.register_profile(
    "repo", derandomize=True, deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("repo")


def random_connected_graph(rng: np.random.Generator, n: int, extra: int) -> WeightedGraph:
    """Random spanning tree plus ``extra`` chords, log-uniform conductances."""
    parent = [int(rng.integers(0, i)) for i in range(1, n)]
    edges = {(p, i) for i, p in enumerate(parent, start=1)}
    tries = 0
    while len(edges) < n - 1 + extra and tries < 20 * (extra + 1):
        a, b = sorted(int(v) for v in rng.integers(0, n, size=2))
        if a != b:
            edges.add((a, b))
        tries += 1
    u, v = np.array(sorted(edges)).T
    w = np.exp(rng.uniform(-2, 2, size=len(u)))
    return WeightedGraph(n, u, v, w)


def star_graph(m: int) -> WeightedGraph:
    return WeightedGraph(m + 1, [0] * m, list(range(1, m + 1)), [1.0] * m)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(20240601))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
