"""CLUS2K: adaptive edge sampling guided by an over-clustering of the observed graph.

Each query is, with probability 1/2, a uniformly random unseen edge. Otherwise
the observed graph W~ is clustered into overcluster_factor * k parts, two
distinct parts are picked uniformly and an unseen edge between them is
queried. Observed weights are stored as-is.

The clustering is cached for recluster_period queries; every recomputation
opens a new epoch, and each trajectory row records the epoch in effect.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import pandas as pd

from simquery.graph import Graph, connected_components
from simquery.sampling import (
    BudgetExceededError,
    QueryOracle,
    SampledGraph,
    StepSampler,
    UnseenEdgePool,
)
from simquery.spectral import MODES, Clustering, spectral_clustering

logger = logging.getLogger(__name__)

MAX_PAIR_REDRAWS = 10


@dataclass(frozen=True)
class Clus2kConfig:
    k: int
    overcluster_factor: int = 2
    recluster_period: int = 1
    mode: str = "unnormalized"
    batch_size: int = 1
    seed: int = 0
    proposal_rate: float = 0.5

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"k must be at least 2, got {self.k}")
        if self.overcluster_factor < 1:
            raise ValueError(f"overcluster_factor must be at least 1, got {self.overcluster_factor}")
        if self.recluster_period < 1:
            raise ValueError(f"recluster_period must be at least 1, got {self.recluster_period}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.mode not in MODES:
            raise ValueError(f"Unknown mode {self.mode!r}, expected one of {MODES}")
        if not 0.0 <= self.proposal_rate <= 1.0:
            raise ValueError(f"proposal_rate must be in [0, 1], got {self.proposal_rate}")

    def with_seed(self, seed: int) -> Clus2kConfig:
        return replace(self, seed=seed)


@dataclass(frozen=True)
class ClusterEpoch:
    epoch: int
    computed_at: int
    clustering: Clustering


def overcluster_target(n: int, cfg: Clus2kConfig) -> int:
    return min(cfg.overcluster_factor * cfg.k, n)


def _bootstrap(parts: list[list[int]], target: int, n: int) -> Clustering:
    """Components merged (or split) by index order into exactly `target` groups."""
    parts = [list(p) for p in parts]
    if len(parts) >= target:
        groups = [
            sum((parts[i] for i in block), [])
            for block in np.array_split(np.arange(len(parts)), target)
        ]
    else:
        groups = parts
        while len(groups) < target:
            largest = max(range(len(groups)), key=lambda g: (len(groups[g]), -groups[g][0]))
            part = sorted(groups.pop(largest))
            half = len(part) // 2
            groups.extend([part[:half], part[half:]])
    labels = np.empty(n, dtype=int)
    for idx, group in enumerate(sorted(groups, key=min)):
        labels[group] = idx
    return Clustering(labels, target)


def overcluster(graph: Graph, cfg: Clus2kConfig) -> Clustering:
    """Cluster the observed graph into exactly min(overcluster_factor * k, n) parts.

    Spectral clustering is used once the observed graph has fewer
    components than the target; before that, and whenever spectral
    clustering leaves some part empty, the components themselves are grouped
    by index order.
    """
    target = overcluster_target(graph.n, cfg)
    parts = connected_components(graph)
    if len(parts) >= target:
        return _bootstrap(parts, target, graph.n)
    clustering = spectral_clustering(graph, target, mode=cfg.mode, seed=cfg.seed)
    if clustering.n_clusters < target:
        logger.debug("Spectral clustering used %d of %d parts; bootstrapping", clustering.n_clusters, target)
        return _bootstrap(parts, target, graph.n)
    return clustering


class Clus2kSampler(StepSampler):
    scheme = "clus2k"

    def __init__(self, oracle: QueryOracle, cfg: Clus2kConfig):
        super().__init__(oracle, cfg.seed)
        self.cfg = cfg
        self.pool = UnseenEdgePool(self.n_edges)
        self.epochs: list[ClusterEpoch] = []
        self._open_epoch()

    def _open_epoch(self) -> None:
        clustering = overcluster(Graph(self._raw, bounded=False), self.cfg)
        epoch = ClusterEpoch(len(self.epochs), self.queries, clustering)
        self.epochs.append(epoch)
        labels = clustering.labels
        self._row_labels = labels[self.rows]
        self._col_labels = labels[self.cols]
        logger.debug("Cluster epoch %d at query %d", epoch.epoch, epoch.computed_at)

    @property
    def current_epoch(self) -> ClusterEpoch:
        return self.epochs[-1]

    def snapshot(self) -> SampledGraph:
        return SampledGraph(
            graph=Graph(self._raw.copy(), bounded=False),
            edge_ids=self.pool.taken_ids(),
            m=self.queries,
            p=None,
            scheme=self.scheme,
            trajectory=self.trajectory,
        )

    def _cross_edge(self) -> Optional[int]:
        rng = self.streams["proposal"]
        unseen = self.pool.unseen_mask()
        for _ in range(MAX_PAIR_REDRAWS):
            a, b = rng.choice(self.current_epoch.clustering.k, size=2, replace=False)
            between = ((self._row_labels == a) & (self._col_labels == b)) | (
                (self._row_labels == b) & (self._col_labels == a)
            )
            candidates = np.flatnonzero(between & unseen)
            if candidates.size:
                return int(candidates[rng.integers(candidates.size)])
        return None

    def step(self, limit: Optional[int] = None) -> int:
        if len(self.pool) == 0:
            raise ValueError("No unseen edges remain")
        if self.streams["coin"].random() >= self.cfg.proposal_rate:
            e = self.pool.draw_uniform(self.streams["uniform"])
            self._observe(e, "uniform", cluster_epoch=self.current_epoch.epoch)
            return e

        if self.queries - self.current_epoch.computed_at >= self.cfg.recluster_period:
            self._open_epoch()
        batch = min(self.cfg.batch_size, len(self.pool))
        if limit is not None:
            batch = max(1, min(batch, limit))
        # One frozen clustering serves the whole batch.
        for _ in range(batch):
            e = self._cross_edge()
            if e is None:
                unseen = self.pool.unseen_ids()
                e, source = int(unseen[self.streams["proposal"].integers(unseen.size)]), "fallback"
                logger.debug("No unseen cross edge after %d pair draws; uniform fallback", MAX_PAIR_REDRAWS)
            else:
                source = "proposal"
            self.pool.take(e)
            self._observe(e, source, cluster_epoch=self.current_epoch.epoch)
        return e


@dataclass
class Clus2kResult:
    sampled: SampledGraph
    epochs: list[ClusterEpoch] = field(default_factory=list)

    @property
    def trajectory(self):
        return self.sampled.trajectory

    def epochs_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(e.epoch, e.computed_at, e.clustering.n_clusters) for e in self.epochs],
            columns=["epoch", "computedAt", "clusters"],
        )


def clus2k_run(oracle: QueryOracle, b: int, cfg: Clus2kConfig) -> Clus2kResult:
    """Query exactly b edges with CLUS2K."""
    sampler = Clus2kSampler(oracle, cfg)
    if b < 0 or b > len(sampler.pool):
        raise ValueError(f"Budget {b} exceeds the {len(sampler.pool)} unseen edges")
    if oracle.budget is not None and b > oracle.remaining:
        raise BudgetExceededError(f"Budget {b} exceeds the oracle's remaining {oracle.remaining} queries")
    while sampler.queries < b:
        sampler.step(limit=b - sampler.queries)

    counts = sampler.trajectory.source_counts()
    if counts["fallback"]:
        logger.warning("Cluster-pair fallback to uniform on %d of %d queries", counts["fallback"], b)
    logger.info("CLUS2K: %d queries, %d cluster epochs", b, len(sampler.epochs))
    return Clus2kResult(sampled=sampler.snapshot(), epochs=list(sampler.epochs))


def clus2k_cluster_state(result: Clus2kResult, step: int) -> Clustering:
    """The over-clustering in effect after `step` queries (0 = bootstrap)."""
    if not 0 <= step <= result.sampled.m:
        raise ValueError(f"Step {step} outside 0..{result.sampled.m}")
    in_effect = [e for e in result.epochs if e.computed_at <= step]
    return in_effect[-1].clustering
