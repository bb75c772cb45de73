import numpy as np
import pytest

from simquery.graph import Graph


def random_graph(n: int, p: float = 0.5, seed: int = 0, binary: bool = False) -> Graph:
    """Random symmetric graph: each pair is an edge with probability p, weight in (0, 1]."""
    rng = np.random.default_rng(seed)
    mask = rng.random((n, n)) < p
    weights = np.ones((n, n)) if binary else 1.0 - rng.random((n, n))
    W = np.triu(weights * mask, 1)
    return Graph(W + W.T)


def connected_random_graph(n: int, p: float = 0.5, seed: int = 0, binary: bool = False) -> Graph:
    """random_graph plus a unit path 0-1-...-(n-1), so the result is connected."""
    W = random_graph(n, p, seed, binary).W.copy()
    idx = np.arange(n - 1)
    W[idx, idx + 1] = W[idx + 1, idx] = 1.0
    return Graph(W)


def two_cliques(size: int, bridge: float = 0.0) -> Graph:
    """Two disjoint unit cliques on 0..size-1 and size..2*size-1, optionally bridged by edge (0, size)."""
    n = 2 * size
    W = np.zeros((n, n))
    W[:size, :size] = 1.0
    W[size:, size:] = 1.0
    np.fill_diagonal(W, 0.0)
    if bridge:
        W[0, size] = W[size, 0] = bridge
    return Graph(W)


@pytest.fixture
def make_random_graph():
    return random_graph


@pytest.fixture
def make_connected_graph():
    return connected_random_graph


@pytest.fixture
def make_two_cliques():
    return two_cliques
