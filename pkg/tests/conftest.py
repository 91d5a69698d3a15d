import numpy as np
import pytest

from asymdetect.graphs import Graph


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def star_graph(leaves: int) -> Graph:
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def ring_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(u, v) for u in range(n) for v in range(u + 1, n)])


def random_graph(n: int, n_extra_edges: int, rng: np.random.Generator) -> Graph:
    """Random connected graph: spanning tree plus extra random edges."""
    edges = {(int(rng.integers(v)), v) for v in range(1, n)}
    for _ in range(n_extra_edges):
        u, v = int(rng.integers(n)), int(rng.integers(n))
        if u != v:
            edges.add((min(u, v), max(u, v)))
    return Graph.from_edges(n, sorted(edges))


def random_tree(n: int, rng: np.random.Generator) -> Graph:
    return Graph.from_edges(n, [(int(rng.integers(v)), v) for v in range(1, n)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
