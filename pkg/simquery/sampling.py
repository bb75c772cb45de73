"""Query oracle over a hidden graph and the edge-sampling schemes built on it.

Three schemes are provided:

  - uniform sampling without replacement, weights rescaled by 1/p so the
    sampled matrix is an unbiased estimate of the hidden one;
  - mixed adaptive sampling without replacement: each step flips a fair
    coin between a uniform unseen edge and an edge drawn from a proposal
    distribution; observed weights are stored as-is (biased);
  - unbiased adaptive sampling with replacement, which draws from the
    half-uniform mixture over all edges and importance-weights each draw.

Every sampler is a small stepping object (`step()`, `snapshot()`) so the
same run can be stopped at any query count; the module-level functions
wrap them for fixed budgets.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import pandas as pd
from scipy.cluster.hierarchy import DisjointSet

from simquery._helpers import edge_count, edge_pairs, seeded_streams
from simquery.graph import Graph, connected_components

logger = logging.getLogger(__name__)

# Stream order is fixed: "uniform" must be the same child for every sampler.
STREAMS = ("coin", "uniform", "proposal")
SOURCES = ("uniform", "proposal", "fallback")
TRAJECTORY_COLUMNS = ["step", "source", "i", "j", "w"]


class BudgetExceededError(RuntimeError):
    """The oracle's query budget would be exceeded."""


class RepeatedQueryError(ValueError):
    """An already-observed edge was queried again by a without-replacement scheme."""


class QueryOracle:
    """Answers edge-weight queries on a hidden graph and counts them.

    Single-owner mutable state: give every repetition its own oracle.
    """

    def __init__(self, hidden: Graph, budget: Optional[int] = None):
        if budget is not None and budget < 0:
            raise ValueError(f"Budget must be nonnegative, got {budget}")
        self._hidden = hidden
        self._budget = budget
        self._queries_used = 0
        self._seen: set[tuple[int, int]] = set()

    @property
    def n(self) -> int:
        return self._hidden.n

    @property
    def budget(self) -> Optional[int]:
        return self._budget

    @property
    def queries_used(self) -> int:
        return self._queries_used

    @property
    def remaining(self) -> Optional[int]:
        if self._budget is None:
            return None
        return self._budget - self._queries_used

    def check_budget(self, m: int) -> None:
        if self._budget is not None and m > self.remaining:
            raise BudgetExceededError(
                f"{m} queries requested but only {self.remaining} of budget {self._budget} remain"
            )

    def query(self, i: int, j: int, allow_repeat: bool = False) -> float:
        """Reveal w_ij. Each call costs one query."""
        if i == j:
            raise ValueError(f"({i}, {j}) is not an edge")
        key = (min(i, j), max(i, j))
        if key in self._seen and not allow_repeat:
            raise RepeatedQueryError(f"Edge {key} was already queried")
        if self._budget is not None and self._queries_used >= self._budget:
            raise BudgetExceededError(f"Query budget {self._budget} exhausted")
        self._seen.add(key)
        self._queries_used += 1
        return float(self._hidden.W[key])


@dataclass(frozen=True)
class TrajectoryStep:
    step: int
    source: str
    i: int
    j: int
    w: float
    cluster_epoch: Optional[int] = None


@dataclass
class Trajectory:
    """Per-query log of a sampling run, in query order."""

    steps: list[TrajectoryStep] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    def record(self, source: str, i: int, j: int, w: float, cluster_epoch: Optional[int] = None) -> None:
        self.steps.append(
            TrajectoryStep(len(self.steps) + 1, source, int(i), int(j), float(w), cluster_epoch)
        )

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(
            [(s.step, s.source, s.i, s.j, s.w) for s in self.steps],
            columns=TRAJECTORY_COLUMNS,
        )
        if any(s.cluster_epoch is not None for s in self.steps):
            df["clusterEpoch"] = [s.cluster_epoch for s in self.steps]
        return df

    def to_csv(self, path: str | Path) -> None:
        self.to_frame().to_csv(path, index=False)

    def source_counts(self) -> dict[str, int]:
        counts = {source: 0 for source in SOURCES}
        for s in self.steps:
            counts[s.source] = counts.get(s.source, 0) + 1
        return counts


@dataclass(frozen=True)
class SampledGraph:
    """The observed approximation W~ of a hidden graph.

    `edge_ids` are the distinct observed upper-triangle edge ids in order of
    first observation; `p` is m / C(n, 2) for the rescaled uniform scheme and
    None otherwise.
    """

    graph: Graph
    edge_ids: np.ndarray
    m: int
    p: Optional[float]
    scheme: str
    trajectory: Optional[Trajectory] = field(default=None, compare=False, repr=False)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def observed(self) -> frozenset[tuple[int, int]]:
        rows, cols = edge_pairs(self.n)
        return frozenset((int(rows[e]), int(cols[e])) for e in self.edge_ids)

    def unseen_mask(self) -> np.ndarray:
        mask = np.ones(edge_count(self.n), dtype=bool)
        mask[np.asarray(self.edge_ids, dtype=int)] = False
        return mask


# A proposal maps the current sampled graph to nonnegative weights over all
# C(n, 2) edge ids, or None when it has nothing to propose.
Proposal = Callable[[SampledGraph], Optional[np.ndarray]]


class UnseenEdgePool:
    """Edge ids split into taken and unseen, with O(1) uniform draws and removal."""

    def __init__(self, n_edges: int):
        self._order = np.arange(n_edges)
        self._pos = np.arange(n_edges)
        self._taken = 0

    def __len__(self) -> int:
        return len(self._order) - self._taken

    def taken_ids(self) -> np.ndarray:
        return self._order[: self._taken].copy()

    def unseen_ids(self) -> np.ndarray:
        return self._order[self._taken:]

    def unseen_mask(self) -> np.ndarray:
        return self._pos >= self._taken

    def take(self, e: int) -> None:
        p = self._pos[e]
        if p < self._taken:
            raise RepeatedQueryError(f"Edge id {e} was already taken")
        t = self._taken
        other = self._order[t]
        self._order[t], self._order[p] = e, other
        self._pos[e], self._pos[other] = t, p
        self._taken += 1

    def draw_uniform(self, rng: np.random.Generator) -> int:
        if len(self) == 0:
            raise ValueError("No unseen edges remain")
        e = int(self._order[rng.integers(self._taken, len(self._order))])
        self.take(e)
        return e


def restricted_proposal(proposal_probs: Optional[np.ndarray], unseen_mask: np.ndarray) -> Optional[np.ndarray]:
    """Proposal renormalized over unseen edges, or None when it has no unseen mass."""
    if proposal_probs is None:
        return None
    q = np.where(unseen_mask, np.asarray(proposal_probs, dtype=float), 0.0)
    if np.any(q < 0):
        raise ValueError("Proposal assigns negative probability")
    total = q.sum()
    return q / total if total > 0 else None


def mixed_step_distribution(
    proposal_probs: Optional[np.ndarray], unseen_mask: np.ndarray, proposal_rate: float = 0.5
) -> np.ndarray:
    """Per-step selection law of the uniform/proposal mixture over unseen edges.

    Proposal mass on seen edges is dropped and the rest renormalized; an
    empty or missing proposal degrades to uniform. Every unseen edge gets at
    least (1 - proposal_rate) / |unseen|, which is 0.5 / |unseen| at the
    default rate.
    """
    unseen_mask = np.asarray(unseen_mask, dtype=bool)
    n_unseen = int(unseen_mask.sum())
    if n_unseen == 0:
        raise ValueError("No unseen edges remain")
    uniform = unseen_mask / n_unseen
    part = restricted_proposal(proposal_probs, unseen_mask)
    if part is None:
        part = uniform
    return (1.0 - proposal_rate) * uniform + proposal_rate * part


class StepSampler:
    """Shared state of a stepping sampler: oracle, named RNG streams, raw weights and trajectory.

    `step(limit)` queries at least one and at most `limit` edges and returns
    the last edge id; only batched samplers query more than one.
    """

    scheme = ""

    def __init__(self, oracle: QueryOracle, seed: int):
        self.oracle = oracle
        self.n = oracle.n
        self.n_edges = edge_count(oracle.n)
        self.rows, self.cols = edge_pairs(oracle.n)
        self.streams = seeded_streams(seed, STREAMS)
        self.trajectory = Trajectory()
        self._raw = np.zeros((self.n, self.n))

    @property
    def queries(self) -> int:
        return len(self.trajectory)

    def _observe(self, e: int, source: str, allow_repeat: bool = False, cluster_epoch: Optional[int] = None) -> float:
        i, j = int(self.rows[e]), int(self.cols[e])
        w = self.oracle.query(i, j, allow_repeat=allow_repeat)
        self._raw[i, j] = self._raw[j, i] = w
        self.trajectory.record(source, i, j, w, cluster_epoch)
        return w


class UniformSampler(StepSampler):
    """Uniform draws without replacement; snapshots rescale by 1/p."""

    scheme = "uniform-rescaled"

    def __init__(self, oracle: QueryOracle, seed: int):
        super().__init__(oracle, seed)
        self.pool = UnseenEdgePool(self.n_edges)

    def step(self, limit: Optional[int] = None) -> int:
        e = self.pool.draw_uniform(self.streams["uniform"])
        self._observe(e, "uniform")
        return e

    def snapshot(self) -> SampledGraph:
        m = self.queries
        p = m / self.n_edges if self.n_edges else 0.0
        W = self._raw / p if m > 0 else np.zeros_like(self._raw)
        return SampledGraph(
            graph=Graph(W, bounded=False),
            edge_ids=self.pool.taken_ids(),
            m=m,
            p=p,
            scheme=self.scheme,
            trajectory=self.trajectory,
        )


class MixedAdaptiveSampler(StepSampler):
    """Biased adaptive sampling without replacement.

    With probability 1 - proposal_rate an unseen edge is drawn uniformly;
    otherwise from the proposal restricted to unseen edges. The default
    proposal_rate is the fair coin; 0 forces pure uniform draws that are
    seed-identical to UniformSampler.
    """

    scheme = "mixed-adaptive"

    def __init__(self, oracle: QueryOracle, proposal: Optional[Proposal], seed: int, proposal_rate: float = 0.5):
        super().__init__(oracle, seed)
        if not 0.0 <= proposal_rate <= 1.0:
            raise ValueError(f"proposal_rate must be in [0, 1], got {proposal_rate}")
        self.proposal = proposal
        self.proposal_rate = proposal_rate
        self.pool = UnseenEdgePool(self.n_edges)

    def snapshot(self) -> SampledGraph:
        return SampledGraph(
            graph=Graph(self._raw.copy(), bounded=False),
            edge_ids=self.pool.taken_ids(),
            m=self.queries,
            p=None,
            scheme=self.scheme,
            trajectory=self.trajectory,
        )

    def step(self, limit: Optional[int] = None) -> int:
        if self.streams["coin"].random() < self.proposal_rate:
            e, source = self._proposal_edge()
        else:
            e, source = self.pool.draw_uniform(self.streams["uniform"]), "uniform"
        self._observe(e, source)
        return e

    def step_distribution(self) -> np.ndarray:
        """Selection law of the next step over all edge ids."""
        return mixed_step_distribution(self._proposal_probs(), self.pool.unseen_mask(), self.proposal_rate)

    def _proposal_probs(self) -> Optional[np.ndarray]:
        return self.proposal(self.snapshot()) if self.proposal is not None else None

    def _proposal_edge(self) -> tuple[int, str]:
        rng = self.streams["proposal"]
        q = restricted_proposal(self._proposal_probs(), self.pool.unseen_mask())
        if q is not None:
            e = int(rng.choice(self.n_edges, p=q))
            self.pool.take(e)
            return e, "proposal"
        logger.debug("Proposal empty at step %d; drawing uniformly", self.queries + 1)
        unseen = self.pool.unseen_ids()
        e = int(unseen[rng.integers(len(unseen))])
        self.pool.take(e)
        return e, "fallback"


class WithReplacementSampler(StepSampler):
    """Unbiased adaptive sampling with replacement.

    Each draw comes from p~(e) = p(e)/2 + 1/(n(n-1)) over all edges and adds
    w_e / p~(e) to the running sum; the estimate after m draws is that sum
    divided by m. Repeated draws of an edge are repeated queries.
    """

    scheme = "unbiased-with-replacement"

    def __init__(self, oracle: QueryOracle, proposal: Optional[Proposal], seed: int):
        super().__init__(oracle, seed)
        self.proposal = proposal
        self._contrib: dict[int, list[float]] = {}

    def _estimate(self) -> np.ndarray:
        W = np.zeros((self.n, self.n))
        m = self.queries
        if m == 0:
            return W
        for e, values in self._contrib.items():
            i, j = self.rows[e], self.cols[e]
            W[i, j] = W[j, i] = math.fsum(values) / m
        return W

    def snapshot(self) -> SampledGraph:
        return SampledGraph(
            graph=Graph(self._estimate(), bounded=False),
            edge_ids=np.array(list(self._contrib), dtype=int),
            m=self.queries,
            p=None,
            scheme=self.scheme,
            trajectory=self.trajectory,
        )

    def step(self, limit: Optional[int] = None) -> int:
        uniform = np.full(self.n_edges, 1.0 / self.n_edges)
        part = None
        if self.proposal is not None:
            probs = self.proposal(self.snapshot())
            if probs is not None:
                probs = np.asarray(probs, dtype=float)
                total = probs.sum()
                if total > 0:
                    part = probs / total
        mixed = 0.5 * uniform + 0.5 * (part if part is not None else uniform)

        if self.streams["coin"].random() < 0.5:
            e, source = int(self.streams["uniform"].integers(self.n_edges)), "uniform"
        elif part is not None:
            e, source = int(self.streams["proposal"].choice(self.n_edges, p=part)), "proposal"
        else:
            e, source = int(self.streams["proposal"].integers(self.n_edges)), "fallback"

        w = self._observe(e, source, allow_repeat=True)
        self._contrib.setdefault(e, []).append(w / mixed[e])
        return e


def uniform_without_replacement(oracle: QueryOracle, m: int, seed: int) -> SampledGraph:
    """m distinct uniformly chosen edges, weights rescaled by 1/p, p = m / C(n, 2)."""
    n_edges = edge_count(oracle.n)
    if not 0 <= m <= n_edges:
        raise ValueError(f"m={m} must lie in [0, {n_edges}]")
    oracle.check_budget(m)
    sampler = UniformSampler(oracle, seed)
    for _ in range(m):
        sampler.step()
    logger.debug("Uniform sampling: %d of %d edges", m, n_edges)
    return sampler.snapshot()


def mixed_adaptive_without_replacement(
    oracle: QueryOracle,
    proposal: Optional[Proposal],
    m: int,
    seed: int,
    proposal_rate: float = 0.5,
) -> SampledGraph:
    """Biased half-uniform adaptive sampling; the trajectory records each step's source."""
    n_edges = edge_count(oracle.n)
    if not 0 <= m <= n_edges:
        raise ValueError(f"m={m} must lie in [0, {n_edges}]")
    oracle.check_budget(m)
    sampler = MixedAdaptiveSampler(oracle, proposal, seed, proposal_rate=proposal_rate)
    for _ in range(m):
        sampler.step()
    counts = sampler.trajectory.source_counts()
    if counts["fallback"]:
        logger.warning("Proposal support was empty on %d of %d steps", counts["fallback"], m)
    return sampler.snapshot()


def unbiased_with_replacement(oracle: QueryOracle, proposal: Optional[Proposal], m: int, seed: int) -> SampledGraph:
    """Importance-weighted estimate from m draws of the half-uniform mixture."""
    if m < 1:
        raise ValueError(f"m must be at least 1, got {m}")
    oracle.check_budget(m)
    sampler = WithReplacementSampler(oracle, proposal, seed)
    for _ in range(m):
        sampler.step()
    return sampler.snapshot()


def uniform_proposal(state: SampledGraph) -> Optional[np.ndarray]:
    """Uniform over unseen edges."""
    unseen = state.unseen_mask()
    if not unseen.any():
        return None
    return unseen / unseen.sum()


def component_join_proposal(state: SampledGraph) -> Optional[np.ndarray]:
    """Uniform over unseen edges leaving a smallest connected component.

    Ties between smallest components go to the one holding the lowest
    vertex. If every edge leaving it is already seen, all unseen edges are
    proposed. Returns None once the observed graph is connected.
    """
    parts = connected_components(state.graph)
    if len(parts) < 2:
        return None
    smallest = min(parts, key=lambda part: (len(part), part[0]))
    inside = np.zeros(state.n, dtype=bool)
    inside[smallest] = True
    rows, cols = edge_pairs(state.n)
    unseen = state.unseen_mask()
    support = (inside[rows] ^ inside[cols]) & unseen
    if not support.any():
        support = unseen
    if not support.any():
        return None
    return support / support.sum()


def steps_until_components(sampler, target: int = 2, max_queries: Optional[int] = None) -> int:
    """Step `sampler` until the observed positive-weight graph has <= target components.

    Returns the number of queries made; a step may query several edges.
    """
    components = DisjointSet(range(sampler.n))
    steps = sampler.trajectory.steps
    merged = len(steps)
    while components.n_subsets > target:
        if max_queries is not None and len(steps) >= max_queries:
            raise RuntimeError(f"Still {components.n_subsets} components after {len(steps)} queries")
        sampler.step()
        for s in steps[merged:]:
            if s.w > 0:
                components.merge(s.i, s.j)
        merged = len(steps)
    return len(steps)


def queries_until_components(
    hidden: Graph,
    strategy,
    target: int = 2,
    seed: int = 0,
    max_queries: Optional[int] = None,
) -> int:
    """Queries a scheme needs before the observed graph has <= target components.

    `strategy` is "uniform", "component-join", or a factory
    `(oracle, seed) -> sampler` for any other stepping sampler.
    """
    oracle = QueryOracle(hidden)
    if callable(strategy):
        sampler = strategy(oracle, seed)
    elif strategy == "uniform":
        sampler = UniformSampler(oracle, seed)
    elif strategy == "component-join":
        sampler = MixedAdaptiveSampler(oracle, component_join_proposal, seed)
    else:
        raise ValueError(f"Unknown strategy {strategy!r}")
    return steps_until_components(sampler, target=target, max_queries=max_queries)
