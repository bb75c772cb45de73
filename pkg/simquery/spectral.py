"""Eigenpairs of Laplacians, spectral clustering and subspace distances."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
import scipy.linalg
from scipy.sparse.linalg import lobpcg
from sklearn.cluster import KMeans

from simquery.graph import ClusterStructure, Graph, laplacian

logger = logging.getLogger(__name__)

MODES = ("normalized", "unnormalized")
KMEANS_RESTARTS = 10
KMEANS_MAX_ITER = 100
ORTHONORMAL_TOL = 1e-6
RESIDUAL_RTOL = 1e-7
GAP_FLOOR = 1e-8
SIN_THETA_SLACK = 1e-7


@dataclass(frozen=True)
class SpectralSummary:
    """Ascending eigenvalues and the matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class Clustering:
    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.array(self.labels, dtype=int, copy=True)
        if self.k < 1:
            raise ValueError(f"Cluster count must be at least 1, got {self.k}")
        if labels.ndim != 1:
            raise ValueError(f"Labels must be a vector, got shape {labels.shape}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ValueError(f"Cluster ids must lie in 0..{self.k - 1}")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def n_clusters(self) -> int:
        """Number of distinct ids actually used."""
        return int(np.unique(self.labels).size)


def _warm_eigenpairs(M: np.ndarray, k: int, initial: np.ndarray) -> Optional[SpectralSummary]:
    X = np.asarray(initial, dtype=float)
    if X.shape != (M.shape[0], k):
        raise ValueError(f"Initial block must have shape {(M.shape[0], k)}, got {X.shape}")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            values, vectors = lobpcg(M, X, largest=False, tol=1e-10, maxiter=200)
    except (np.linalg.LinAlgError, ValueError):
        return None
    order = np.argsort(values)
    values, vectors = values[order], vectors[:, order]
    scale = max(np.linalg.norm(M, 2), 1.0)
    residual = np.linalg.norm(M @ vectors - vectors * values, axis=0)
    if residual.max() > RESIDUAL_RTOL * scale:
        return None
    if np.abs(vectors.T @ vectors - np.eye(k)).max() > 1e-8:
        return None
    return SpectralSummary(values, vectors)


def smallest_eigenpairs(M: np.ndarray, k: int, initial: Optional[np.ndarray] = None) -> SpectralSummary:
    """The k smallest eigenpairs of a symmetric matrix.

    `initial` (n x k) enables an iterative warm start from previously
    computed eigenvectors; the dense solve is used whenever it does not
    converge to full accuracy.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    if initial is not None:
        warm = _warm_eigenpairs(M, k, initial)
        if warm is not None:
            return warm
        logger.debug("Warm-started eigensolve did not converge; using dense solve")
    values, vectors = scipy.linalg.eigh(M, subset_by_index=[0, k - 1])
    return SpectralSummary(values, vectors)


def embedding(G: Graph, k: int, mode: str = "unnormalized", initial: Optional[np.ndarray] = None) -> np.ndarray:
    """Rows of the n x k smallest-eigenvector matrix used for clustering."""
    if mode not in MODES:
        raise ValueError(f"Unknown mode {mode!r}, expected one of {MODES}")
    pair = laplacian(G)
    M = pair.normalized if mode == "normalized" else pair.L
    U = smallest_eigenpairs(M, k, initial=initial).eigenvectors
    if mode == "normalized":
        norms = np.linalg.norm(U, axis=1, keepdims=True)
        U = np.divide(U, norms, out=np.zeros_like(U), where=norms > 0)
    return U


def spectral_clustering(G: Graph, k: int, mode: str = "unnormalized", seed: int = 0) -> Clustering:
    """k-means on the spectral embedding; ids renumbered by first appearance."""
    n = G.n
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    if k == n:
        return Clustering(np.arange(n), k)
    U = embedding(G, k, mode=mode)
    with warnings.catch_warnings():
        # Repeated embedding rows (isolated vertices) make k-means warn about
        # fewer distinct points than clusters.
        warnings.simplefilter("ignore")
        km = KMeans(n_clusters=k, n_init=KMEANS_RESTARTS, max_iter=KMEANS_MAX_ITER, random_state=seed)
        raw = km.fit_predict(U)
    labels, _ = pd.factorize(raw)
    logger.debug("Spectral clustering (%s): %d vertices into %d clusters", mode, n, k)
    return Clustering(labels, k)


def _check_orthonormal(X: np.ndarray, name: str) -> None:
    k = X.shape[1]
    if np.abs(X.T @ X - np.eye(k)).max() > ORTHONORMAL_TOL:
        raise ValueError(f"{name} does not have orthonormal columns")


def sin_theta_distance(P: np.ndarray, Q: np.ndarray) -> float:
    """Spectral norm of sin of the principal angles between span(P) and span(Q)."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    if Q.ndim == 1:
        Q = Q[:, None]
    if P.shape != Q.shape:
        raise ValueError(f"Bases must have equal shape, got {P.shape} and {Q.shape}")
    _check_orthonormal(P, "P")
    _check_orthonormal(Q, "Q")
    angles = scipy.linalg.subspace_angles(P, Q)
    return float(np.clip(np.sin(angles.max()), 0.0, 1.0))


def second_smallest_normalized_eigenvalue(G: Graph) -> float:
    """lambda_2 of the normalized Laplacian."""
    if G.n < 2:
        raise ValueError("Need at least 2 vertices")
    return float(scipy.linalg.eigvalsh(laplacian(G).normalized)[1])


def second_smallest_unnormalized(G: Graph) -> float:
    """mu_2 of L = D - W."""
    if G.n < 2:
        raise ValueError("Need at least 2 vertices")
    return float(scipy.linalg.eigvalsh(laplacian(G).L)[1])


def cluster_indicator_basis(labels: np.ndarray, k: int) -> np.ndarray:
    """Columns 1_C / sqrt(|C|) for each cluster C; empty clusters are rejected."""
    labels = np.asarray(labels, dtype=int)
    P = np.zeros((labels.size, k))
    for c in range(k):
        members = labels == c
        size = members.sum()
        if size == 0:
            raise ValueError(f"Cluster {c} is empty")
        P[members, c] = 1.0 / np.sqrt(size)
    return P


@dataclass(frozen=True)
class SinThetaReport:
    sin_theta: float
    bound: float
    out_norm: float
    mu_in: float
    holds: bool


def sin_theta_check(sampled: Graph, structure: ClusterStructure, slack: float = SIN_THETA_SLACK) -> SinThetaReport:
    """Compare sin Theta(P, Q) with ||L~out|| / mu~in on a sampled graph.

    P spans the normalized cluster indicators and Q the first k eigenvectors
    of L~. L~ splits into within- and between-cluster Laplacians along the
    given clusters; mu~in is the (k+1)-th smallest eigenvalue of L~in, and
    the bound is infinite once it falls below GAP_FLOOR.
    """
    k = structure.k
    if sampled.n != structure.labels.size:
        raise ValueError(f"Graph has {sampled.n} vertices but structure labels {structure.labels.size}")
    if k >= sampled.n:
        raise ValueError(f"Need more vertices than clusters, got n={sampled.n} k={k}")
    W_in, W_out = structure.split(sampled.W)
    L_in = laplacian(Graph(W_in, bounded=False)).L
    L_out = laplacian(Graph(W_out, bounded=False)).L

    P = cluster_indicator_basis(structure.labels, k)
    Q = smallest_eigenpairs(laplacian(sampled).L, k).eigenvectors
    sin_theta = sin_theta_distance(P, Q)

    mu_in = float(scipy.linalg.eigvalsh(L_in)[k])
    out_norm = float(np.linalg.norm(L_out, 2))
    bound = out_norm / mu_in if mu_in > GAP_FLOOR else np.inf
    return SinThetaReport(
        sin_theta=sin_theta,
        bound=float(bound),
        out_norm=out_norm,
        mu_in=mu_in,
        holds=bool(sin_theta <= bound + slack),
    )
