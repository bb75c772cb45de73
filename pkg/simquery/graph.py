"""Weighted-graph data model: Laplacians, cuts, components and minimum cuts.

Every graph is a dense symmetric weight matrix over n vertices; an entry of
zero is a non-edge. Values are read-only after construction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import networkx as nx
import numpy as np
import pandas as pd
from scipy.sparse import csgraph

logger = logging.getLogger(__name__)

ALGEBRAIC_RTOL = 1e-9
ZERO_EIGENVALUE_ATOL = 1e-8
EXHAUSTIVE_MIN_CUT_LIMIT = 20
# Rows of binary cut indicators evaluated per batch when enumerating cuts.
CUT_CHUNK = 1 << 15


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def _frozen_labels(labels: np.ndarray) -> np.ndarray:
    labels = np.array(labels, dtype=int, copy=True)
    labels.setflags(write=False)
    return labels


@dataclass(frozen=True)
class Graph:
    """Symmetric nonnegative weight matrix with zero diagonal.

    `bounded` graphs additionally keep every weight in [0, 1]; rescaled
    estimates (weights divided by a sampling probability) are built with
    bounded=False.
    """

    W: np.ndarray
    bounded: bool = True

    def __post_init__(self):
        W = _frozen(self.W)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError(f"Weight matrix must be square, got shape {W.shape}")
        if not np.all(np.isfinite(W)):
            raise ValueError("Weight matrix contains non-finite entries")
        if not np.array_equal(W, W.T):
            raise ValueError("Weight matrix is not symmetric")
        if np.any(np.diag(W) != 0):
            raise ValueError("Weight matrix must have a zero diagonal")
        if np.any(W < 0):
            raise ValueError(f"Negative weight {W.min()} in weight matrix")
        if self.bounded and np.any(W > 1):
            raise ValueError(f"Weight {W.max()} exceeds 1 in a bounded graph")
        object.__setattr__(self, "W", W)

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @classmethod
    def empty(cls, n: int) -> Graph:
        return cls(np.zeros((n, n)))

    def scaled(self, factor: float) -> Graph:
        """Graph with every weight multiplied by `factor` (never bounded-checked)."""
        return Graph(self.W * factor, bounded=False)


@dataclass(frozen=True)
class LaplacianPair:
    L: np.ndarray
    normalized: np.ndarray
    degrees: np.ndarray


@dataclass(frozen=True)
class CutSpec:
    """A cut given by the vertex side S of an n-vertex graph."""

    S: frozenset[int]
    n: int

    def __post_init__(self):
        S = frozenset(int(v) for v in self.S)
        if not S:
            raise ValueError("Cut side S must be nonempty")
        if len(S) >= self.n:
            raise ValueError(f"Cut side S must be a proper subset of {self.n} vertices")
        if min(S) < 0 or max(S) >= self.n:
            raise ValueError(f"Cut side {sorted(S)} has vertices outside 0..{self.n - 1}")
        object.__setattr__(self, "S", S)

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> CutSpec:
        mask = np.asarray(mask, dtype=bool)
        return cls(frozenset(np.flatnonzero(mask).tolist()), len(mask))

    def mask(self) -> np.ndarray:
        m = np.zeros(self.n, dtype=bool)
        m[list(self.S)] = True
        return m

    def complement(self) -> CutSpec:
        return CutSpec(frozenset(range(self.n)) - self.S, self.n)

    def vertices(self) -> list[int]:
        return sorted(self.S)


def laplacian(G: Graph) -> LaplacianPair:
    """L = D - W and the normalized D^-1/2 L D^-1/2.

    Zero-degree vertices use the pseudo-inverse of D^1/2, so their rows and
    columns of the normalized Laplacian are zero.
    """
    degrees = G.W.sum(axis=1)
    L = np.diag(degrees) - G.W
    inv_sqrt = np.zeros_like(degrees)
    positive = degrees > 0
    inv_sqrt[positive] = 1.0 / np.sqrt(degrees[positive])
    normalized = inv_sqrt[:, None] * L * inv_sqrt[None, :]
    # Exact symmetry; the scaling above can introduce last-bit asymmetry.
    normalized = (normalized + normalized.T) / 2
    return LaplacianPair(L=_frozen(L), normalized=_frozen(normalized), degrees=_frozen(degrees))


def quadratic_form(G: Graph, x: np.ndarray) -> float:
    """x^T L x, evaluated as (1/2) sum_ij W_ij (x_i - x_j)^2."""
    x = np.asarray(x, dtype=float)
    diff = x[:, None] - x[None, :]
    return 0.5 * float(np.sum(G.W * diff * diff))


def cut_weight(G: Graph, cut: CutSpec) -> float:
    """Total weight of edges with exactly one endpoint in S."""
    if cut.n != G.n:
        raise ValueError(f"Cut over {cut.n} vertices applied to a graph with {G.n}")
    inside = cut.mask()
    return float(G.W[np.ix_(inside, ~inside)].sum())


def iter_cut_masks(n: int, chunk: int = CUT_CHUNK) -> Iterator[np.ndarray]:
    """Yield boolean blocks covering all 2^(n-1) - 1 cuts of n vertices.

    Vertex n-1 is always outside S, so each cut appears once (S and its
    complement are the same cut).
    """
    if n < 2:
        return
    total = 1 << (n - 1)
    bits = np.arange(n - 1, dtype=np.int64)
    for start in range(1, total, chunk):
        ids = np.arange(start, min(start + chunk, total), dtype=np.int64)
        block = np.zeros((len(ids), n), dtype=bool)
        block[:, : n - 1] = (ids[:, None] >> bits[None, :]) & 1
        yield block


def cut_values(W: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Cut weight of every row of `masks`: the sum of W over S x (V \\ S)."""
    X = masks.astype(float)
    return np.einsum("ij,ij->i", X @ W, 1.0 - X)


def connected_components(G: Graph) -> list[list[int]]:
    """Vertex partition by positive-weight connectivity, parts ordered by lowest vertex."""
    _, labels = csgraph.connected_components(G.W > 0, directed=False)
    parts: dict[int, list[int]] = {}
    for v, lab in enumerate(labels):
        parts.setdefault(int(lab), []).append(v)
    return sorted(parts.values(), key=lambda part: part[0])


def component_labels(G: Graph) -> np.ndarray:
    """Component id per vertex, ids numbered by each part's lowest vertex."""
    labels = np.empty(G.n, dtype=int)
    for idx, part in enumerate(connected_components(G)):
        labels[part] = idx
    return labels


def _min_cut_exhaustive(G: Graph) -> tuple[float, CutSpec]:
    best_value = np.inf
    best_mask = None
    for block in iter_cut_masks(G.n):
        values = cut_values(G.W, block)
        idx = int(np.argmin(values))
        if values[idx] < best_value:
            best_value = float(values[idx])
            best_mask = block[idx]
    return max(best_value, 0.0), CutSpec.from_mask(best_mask)


def _min_cut_stoer_wagner(G: Graph) -> tuple[float, CutSpec]:
    nxg = nx.Graph()
    nxg.add_nodes_from(range(G.n))
    rows, cols = np.nonzero(np.triu(G.W, k=1))
    nxg.add_weighted_edges_from(
        (int(i), int(j), float(G.W[i, j])) for i, j in zip(rows, cols)
    )
    value, (side, _) = nx.stoer_wagner(nxg)
    return float(value), CutSpec(frozenset(side), G.n)


def min_cut(G: Graph, method: str = "auto") -> tuple[float, CutSpec]:
    """Global minimum cut weight and one witnessing side S.

    method: "exhaustive" (all 2^(n-1) - 1 cuts), "stoer_wagner", or "auto"
    (exhaustive up to EXHAUSTIVE_MIN_CUT_LIMIT vertices). A disconnected
    graph returns weight 0 with its first component as S.
    """
    if G.n < 2:
        raise ValueError("Minimum cut needs at least 2 vertices")
    parts = connected_components(G)
    if len(parts) > 1:
        return 0.0, CutSpec(frozenset(parts[0]), G.n)

    if method == "auto":
        method = "exhaustive" if G.n <= EXHAUSTIVE_MIN_CUT_LIMIT else "stoer_wagner"
    if method == "exhaustive":
        return _min_cut_exhaustive(G)
    if method == "stoer_wagner":
        return _min_cut_stoer_wagner(G)
    raise ValueError(f"Unknown min-cut method {method!r}")


def subgraph(G: Graph, vertices: list[int]) -> Graph:
    idx = np.asarray(vertices, dtype=int)
    return Graph(G.W[np.ix_(idx, idx)], bounded=G.bounded)


@dataclass(frozen=True)
class ClusterStructure:
    """A partition of the vertices and the graph quantities it induces.

    c_in is the smallest minimum cut inside any cluster (inf when every
    cluster is a single vertex); c_out the largest cut separating a union of
    clusters from the rest.
    """

    labels: np.ndarray
    k: int
    W_in: np.ndarray = field(repr=False)
    W_out: np.ndarray = field(repr=False)
    c_in: float
    c_out: float
    lambda_in: float
    min_in_degree: float

    @property
    def clusters(self) -> list[list[int]]:
        return [np.flatnonzero(self.labels == c).tolist() for c in range(self.k)]

    def split(self, W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Split any weight matrix into its within- and between-cluster parts."""
        same = self.labels[:, None] == self.labels[None, :]
        W = np.asarray(W, dtype=float)
        return np.where(same, W, 0.0), np.where(same, 0.0, W)

    @classmethod
    def from_labels(cls, G: Graph, labels: np.ndarray, min_cut_method: str = "auto") -> ClusterStructure:
        labels = np.asarray(labels, dtype=int)
        if labels.shape != (G.n,):
            raise ValueError(f"Expected {G.n} labels, got shape {labels.shape}")
        k = int(labels.max()) + 1
        if set(np.unique(labels).tolist()) != set(range(k)):
            raise ValueError("Cluster labels must cover 0..k-1 without gaps")

        same = labels[:, None] == labels[None, :]
        W_in = np.where(same, G.W, 0.0)
        W_out = np.where(same, 0.0, G.W)

        c_in = np.inf
        lambda_in = np.inf
        for c in range(k):
            members = np.flatnonzero(labels == c).tolist()
            if len(members) < 2:
                continue
            block = subgraph(G, members)
            value, _ = min_cut(block, method=min_cut_method)
            c_in = min(c_in, value)
            eigenvalues = np.linalg.eigvalsh(laplacian(block).normalized)
            lambda_in = min(lambda_in, float(eigenvalues[1]))

        c_out = 0.0
        if k > 1:
            # Unions of clusters, last cluster always outside.
            for block in iter_cut_masks(k):
                vertex_masks = block[:, labels]
                c_out = max(c_out, float(cut_values(W_out, vertex_masks).max()))

        structure = cls(
            labels=_frozen_labels(labels),
            k=k,
            W_in=_frozen(W_in),
            W_out=_frozen(W_out),
            c_in=float(c_in),
            c_out=c_out,
            lambda_in=float(lambda_in),
            min_in_degree=float(W_in.sum(axis=1).min()),
        )
        logger.debug("Cluster structure: k=%d c_in=%.4g c_out=%.4g", k, structure.c_in, c_out)
        return structure


def read_graph_csv(path: str | Path) -> Graph:
    """Read the "n=<count>" header plus "i,j,w" upper-triangular rows."""
    path = Path(path)
    with path.open() as f:
        header = f.readline().strip()
        if not header.startswith("n="):
            raise ValueError(f"{path}: expected header 'n=<count>', got {header!r}")
        try:
            n = int(header[2:])
        except ValueError as e:
            raise ValueError(f"{path}: bad vertex count in header {header!r}") from e
        df = pd.read_csv(f, header=None, names=["i", "j", "w"], float_precision="round_trip")

    W = np.zeros((n, n))
    if not df.empty:
        i = df["i"].to_numpy(dtype=int)
        j = df["j"].to_numpy(dtype=int)
        if np.any((i < 0) | (j < 0) | (i >= n) | (j >= n) | (i == j)):
            raise ValueError(f"{path}: edge indices must be distinct vertices in 0..{n - 1}")
        W[i, j] = df["w"].to_numpy(dtype=float)
        W[j, i] = W[i, j]
    bounded = bool(np.all(W <= 1))
    return Graph(W, bounded=bounded)


def write_graph_csv(G: Graph, path: str | Path) -> None:
    rows, cols = np.nonzero(np.triu(G.W, k=1))
    df = pd.DataFrame({"i": rows, "j": cols, "w": G.W[rows, cols]})
    path = Path(path)
    with path.open("w", newline="") as f:
        f.write(f"n={G.n}\n")
        df.to_csv(f, header=False, index=False, float_format="%.17g")
