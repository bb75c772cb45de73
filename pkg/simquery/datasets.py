"""Synthetic datasets, similarity graphs, planted clusterable graphs and purity.

Run:
  python -m simquery sample uniform --dataset gaussians --m 500
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.spatial.distance import pdist, squareform
from sklearn.datasets import make_blobs, make_moons

from simquery._helpers import get_seeded_rng
from simquery.graph import ClusterStructure, Graph
from simquery.spectral import Clustering

logger = logging.getLogger(__name__)

DEFAULT_CENTERS = ((0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (10.0, 10.0))
CROSS_MODELS = ("none", "weighted", "binary")
MAX_PLANTED_ATTEMPTS = 100


class EmptyInputError(ValueError):
    """The input file holds no data rows."""


class MalformedRowError(ValueError):
    """A row has the wrong number of fields."""


class NonNumericFeatureError(ValueError):
    """A feature column holds a value that is not a number."""


class PlantedSpecError(RuntimeError):
    """No generated instance satisfied the planted specification."""


@dataclass(frozen=True)
class LabeledPoints:
    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=float, copy=True)
        labels = np.array(self.labels, dtype=int, copy=True)
        if points.ndim != 2 or points.shape[0] < 1:
            raise ValueError(f"Points must be a nonempty n x d matrix, got shape {points.shape}")
        if labels.shape != (points.shape[0],):
            raise ValueError(f"Expected {points.shape[0]} labels, got shape {labels.shape}")
        if labels.min() < 0:
            raise ValueError("Class ids must be nonnegative")
        points.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def n_classes(self) -> int:
        return int(np.unique(self.labels).size)


def two_half_circles(n_per_class: int, noise_std: float = 0.0, seed: int = 0) -> LabeledPoints:
    """Two interleaved unit half circles; the first n_per_class points are class 0.

    Class 0 lies on the upper arc around the origin, class 1 on the lower arc
    around (1, 0.5). This is the make_moons geometry; centering the lower arc
    at (1, -0.5) instead would separate the arcs rather than interleave them.
    """
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be at least 1, got {n_per_class}")
    if noise_std < 0:
        raise ValueError(f"noise_std must be nonnegative, got {noise_std}")
    X, y = make_moons(
        n_samples=(n_per_class, n_per_class),
        shuffle=False,
        noise=noise_std if noise_std > 0 else None,
        random_state=seed,
    )
    return LabeledPoints(X, y)


def gaussian_blobs(
    n_per_class: int,
    centers: Sequence[Sequence[float]] = DEFAULT_CENTERS,
    std: float = 1.0,
    seed: int = 0,
) -> LabeledPoints:
    """Isotropic Gaussian blobs, n_per_class points per center, in center order."""
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be at least 1, got {n_per_class}")
    if std < 0:
        raise ValueError(f"std must be nonnegative, got {std}")
    centers = np.asarray(centers, dtype=float)
    X, y = make_blobs(
        n_samples=[n_per_class] * len(centers),
        centers=centers,
        cluster_std=std,
        shuffle=False,
        random_state=seed,
    )
    return LabeledPoints(X, y)


def median_sigma(points: np.ndarray) -> float:
    """Median pairwise distance, or 1.0 when it is zero or undefined."""
    distances = pdist(np.asarray(points, dtype=float))
    if distances.size == 0:
        return 1.0
    sigma = float(np.median(distances))
    return sigma if sigma > 0 else 1.0


def rbf_similarity(points: np.ndarray, sigma: Optional[float] = None) -> Graph:
    """W_ij = exp(-|x_i - x_j|^2 / (2 sigma^2)), zero diagonal.

    sigma defaults to the median pairwise distance.
    """
    points = np.asarray(points, dtype=float)
    if sigma is None:
        sigma = median_sigma(points)
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    sq = squareform(pdist(points, "sqeuclidean"))
    W = np.exp(-sq / (2 * sigma**2))
    np.fill_diagonal(W, 0.0)
    return Graph(W)


@dataclass(frozen=True)
class PlantedGraphSpec:
    """Unit-weight random clusters plus sparse cross-cluster edges.

    Each within-cluster pair is an edge with probability within_prob. Cross
    models: "none" (no edges between clusters), "weighted" (cross_edges
    random pairs per cluster pair, each of weight cross_weight) and "binary"
    (cross_edges random unit-weight pairs per cluster pair). c_in_min and
    c_out_max, when set, are verified on every generated instance.
    """

    cluster_sizes: tuple[int, ...]
    within_prob: float = 1.0
    cross_model: str = "none"
    cross_edges: int = 0
    cross_weight: float = 1.0
    c_in_min: Optional[float] = None
    c_out_max: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "cluster_sizes", tuple(int(s) for s in self.cluster_sizes))
        if not self.cluster_sizes or min(self.cluster_sizes) < 1:
            raise ValueError(f"Cluster sizes must be positive, got {self.cluster_sizes}")
        if not 0 <= self.within_prob <= 1:
            raise ValueError(f"within_prob must be in [0, 1], got {self.within_prob}")
        if self.cross_model not in CROSS_MODELS:
            raise ValueError(f"Unknown cross model {self.cross_model!r}, expected one of {CROSS_MODELS}")
        if self.cross_edges < 0:
            raise ValueError(f"cross_edges must be nonnegative, got {self.cross_edges}")
        if not 0 < self.cross_weight <= 1:
            raise ValueError(f"cross_weight must be in (0, 1], got {self.cross_weight}")

    @property
    def n(self) -> int:
        return sum(self.cluster_sizes)

    def labels(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.cluster_sizes)), self.cluster_sizes)


def _planted_weights(spec: PlantedGraphSpec, rng: np.random.Generator) -> np.ndarray:
    n = spec.n
    W = np.zeros((n, n))
    starts = np.concatenate([[0], np.cumsum(spec.cluster_sizes)])
    for a, size in enumerate(spec.cluster_sizes):
        lo = starts[a]
        block = np.triu(rng.random((size, size)) < spec.within_prob, k=1).astype(float)
        W[lo : lo + size, lo : lo + size] = block + block.T

    if spec.cross_model != "none" and spec.cross_edges > 0:
        weight = 1.0 if spec.cross_model == "binary" else spec.cross_weight
        for a in range(len(spec.cluster_sizes)):
            for b in range(a + 1, len(spec.cluster_sizes)):
                A = np.arange(starts[a], starts[a + 1])
                B = np.arange(starts[b], starts[b + 1])
                count = min(spec.cross_edges, A.size * B.size)
                picks = rng.choice(A.size * B.size, size=count, replace=False)
                i, j = A[picks // B.size], B[picks % B.size]
                W[i, j] = W[j, i] = weight
    return W


def planted_clusterable(spec: PlantedGraphSpec) -> tuple[Graph, ClusterStructure]:
    """Generate a graph with verified cluster structure.

    Every cluster must be connected; instances failing c_in_min or c_out_max
    are regenerated, up to MAX_PLANTED_ATTEMPTS times.
    """
    rng = get_seeded_rng(spec.seed)
    labels = spec.labels()
    for attempt in range(1, MAX_PLANTED_ATTEMPTS + 1):
        G = Graph(_planted_weights(spec, rng))
        structure = ClusterStructure.from_labels(G, labels)
        connected = structure.c_in > 0
        if connected and (spec.c_in_min is None or structure.c_in >= spec.c_in_min) and (
            spec.c_out_max is None or structure.c_out <= spec.c_out_max
        ):
            logger.debug(
                "Planted graph after %d attempt(s): c_in=%g c_out=%g", attempt, structure.c_in, structure.c_out
            )
            return G, structure
    raise PlantedSpecError(f"No instance of {spec} met its bounds after {MAX_PLANTED_ATTEMPTS} attempts")


def purity(predicted: Union[Clustering, np.ndarray], truth: np.ndarray) -> float:
    """Sum over clusters of the most frequent class count, divided by n."""
    pred = predicted.labels if isinstance(predicted, Clustering) else np.asarray(predicted)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"Length mismatch: {pred.shape} predicted vs {truth.shape} truth")
    if pred.size == 0:
        raise ValueError("Cannot score an empty clustering")
    table = pd.crosstab(pred, truth)
    return float(table.max(axis=1).sum() / pred.size)


def _encode_labels(raw: pd.Series) -> np.ndarray:
    numeric = pd.to_numeric(raw, errors="coerce")
    if numeric.notna().all() and np.all(numeric == np.floor(numeric)):
        codes, _ = pd.factorize(numeric.astype(int), sort=True)
    else:
        codes, _ = pd.factorize(raw)
    return codes


def load_points_csv(path: Union[str, Path], has_header: Optional[bool] = None) -> LabeledPoints:
    """Numeric feature columns followed by one class-label column.

    A header row is detected when none of its feature fields is numeric
    (has_header=None). Labels are integer ids, or strings mapped to ids in
    order of first appearance.
    """
    path = Path(path)
    try:
        df = pd.read_csv(path, header=None, dtype=str, skipinitialspace=True)
    except pd.errors.EmptyDataError as e:
        raise EmptyInputError(f"{path}: empty input") from e
    except pd.errors.ParserError as e:
        raise MalformedRowError(f"{path}: {e}") from e

    if df.shape[1] < 2:
        raise MalformedRowError(f"{path}: need at least one feature column and a label column")
    df = df.apply(lambda col: col.str.strip())

    if has_header is None:
        first = pd.to_numeric(df.iloc[0, :-1], errors="coerce")
        has_header = bool(first.isna().all())
    if has_header:
        df = df.iloc[1:].reset_index(drop=True)
    if df.empty:
        raise EmptyInputError(f"{path}: empty input")

    incomplete = df.isna().any(axis=1) | (df == "").any(axis=1)
    if incomplete.any():
        row = int(np.flatnonzero(incomplete.to_numpy())[0]) + 1 + int(has_header)
        raise MalformedRowError(f"{path}: row {row} has missing fields")

    features = df.iloc[:, :-1].apply(pd.to_numeric, errors="coerce")
    if features.isna().to_numpy().any():
        r, c = np.argwhere(features.isna().to_numpy())[0]
        raise NonNumericFeatureError(
            f"{path}: non-numeric feature {df.iat[r, c]!r} at row {r + 1 + int(has_header)}, column {c + 1}"
        )
    labels = _encode_labels(df.iloc[:, -1])
    logger.info("Loaded %d points with %d features from %s", len(df), features.shape[1], path)
    return LabeledPoints(features.to_numpy(dtype=float), labels)
