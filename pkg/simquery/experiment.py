"""Budget sweeps comparing sampling schemes by the purity of spectral clustering.

For every (scheme, repetition) one sampler runs up to the largest budget;
the sampled graph is clustered at each budget on the way, so every budget
point of a repetition shares one trajectory.

Run:
  python -m simquery experiment run --config experiments/gaussians.yml

Environment:
  SIMQUERY_WORKERS   worker processes for (scheme, repetition) cells (default 1)
  LOG_LEVEL          logging level (default INFO)
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
import yaml

from simquery._helpers import edge_count
from simquery.clus2k import Clus2kConfig, Clus2kSampler
from simquery.datasets import LabeledPoints, gaussian_blobs, load_points_csv, purity, rbf_similarity, two_half_circles
from simquery.graph import Graph
from simquery.reports import purity_chart
from simquery.sampling import (
    MixedAdaptiveSampler,
    QueryOracle,
    StepSampler,
    UniformSampler,
    WithReplacementSampler,
    component_join_proposal,
)
from simquery.spectral import MODES, spectral_clustering

logger = logging.getLogger(__name__)

SCHEMES = ("uniform", "clus2k", "component-join", "with-replacement")
DATASETS = ("gaussians", "half-circles", "csv")
RESULT_COLUMNS = ["scheme", "budget", "rep", "seed", "purity", "wallMillis"]
AGGREGATE_COLUMNS = ["scheme", "budget", "meanPurity", "stdPurity", "reps"]
SEED_STRIDE = 10007
DEFAULT_BUDGET_FRACTIONS = tuple(np.linspace(0.01, 0.20, 10))


class ConfigError(ValueError):
    """Experiment configuration is invalid."""


def default_workers() -> int:
    return int(os.environ.get("SIMQUERY_WORKERS", "1"))


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment, read from a flat YAML mapping with these keys."""

    name: str
    k: int
    dataset: str = "gaussians"
    n_per_class: int = 50
    noise_std: float = 1.0
    dataset_seed: int = 0
    csv_path: Optional[str] = None
    sigma: Optional[float] = None
    schemes: tuple[str, ...] = ("uniform", "clus2k")
    budgets: Optional[tuple[int, ...]] = None
    mode: str = "unnormalized"
    repetitions: int = 5
    seed_base: int = 0
    overcluster_factor: int = 2
    recluster_period: int = 1
    batch_size: int = 1
    record_timing: bool = False
    output: str = "results"
    workers: int = field(default_factory=default_workers)

    def __post_init__(self):
        object.__setattr__(self, "schemes", tuple(self.schemes))
        if self.budgets is not None:
            object.__setattr__(self, "budgets", tuple(int(b) for b in self.budgets))
        if self.k < 2:
            raise ConfigError(f"k must be at least 2, got {self.k}")
        if self.dataset not in DATASETS:
            raise ConfigError(f"Unknown dataset {self.dataset!r}, expected one of {DATASETS}")
        if self.dataset == "csv" and not self.csv_path:
            raise ConfigError("dataset 'csv' needs csv_path")
        if not self.schemes:
            raise ConfigError("At least one scheme is required")
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown:
            raise ConfigError(f"Unknown scheme(s) {unknown}, expected a subset of {SCHEMES}")
        if self.mode not in MODES:
            raise ConfigError(f"Unknown mode {self.mode!r}, expected one of {MODES}")
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be at least 1, got {self.repetitions}")
        if self.budgets is not None:
            b = np.asarray(self.budgets)
            if b.size == 0 or b.min() < 1 or np.any(np.diff(b) <= 0):
                raise ConfigError(f"budgets must be positive and strictly ascending, got {list(self.budgets)}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")

    def seed(self, rep: int) -> int:
        return self.seed_base + rep * SEED_STRIDE

    def clus2k_config(self, seed: int) -> Clus2kConfig:
        return Clus2kConfig(
            k=self.k,
            overcluster_factor=self.overcluster_factor,
            recluster_period=self.recluster_period,
            mode=self.mode,
            batch_size=self.batch_size,
            seed=seed,
        )

    def resolve_budgets(self, n: int) -> list[int]:
        """Configured budgets, or 1%..20% of C(n, 2) in 10 steps; all must fit in C(n, 2)."""
        total = edge_count(n)
        if self.budgets is None:
            budgets = sorted({max(1, int(round(f * total))) for f in DEFAULT_BUDGET_FRACTIONS})
        else:
            budgets = list(self.budgets)
        if budgets[-1] > total:
            raise ConfigError(f"Budget {budgets[-1]} exceeds the {total} edges of a {n}-vertex graph")
        return budgets


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "r") as f:
            raw = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"{path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a key-value mapping")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")
    try:
        return ExperimentConfig(**raw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path}: {e}") from e


def load_dataset(cfg: ExperimentConfig) -> LabeledPoints:
    if cfg.dataset == "gaussians":
        return gaussian_blobs(cfg.n_per_class, std=cfg.noise_std, seed=cfg.dataset_seed)
    if cfg.dataset == "half-circles":
        return two_half_circles(cfg.n_per_class, noise_std=cfg.noise_std, seed=cfg.dataset_seed)
    return load_points_csv(cfg.csv_path)


def make_sampler(scheme: str, oracle: QueryOracle, seed: int, cfg: ExperimentConfig) -> StepSampler:
    if scheme == "uniform":
        return UniformSampler(oracle, seed)
    if scheme == "clus2k":
        return Clus2kSampler(oracle, cfg.clus2k_config(seed))
    if scheme == "component-join":
        return MixedAdaptiveSampler(oracle, component_join_proposal, seed)
    if scheme == "with-replacement":
        return WithReplacementSampler(oracle, component_join_proposal, seed)
    raise ConfigError(f"Unknown scheme {scheme!r}")


def run_cell(
    hidden: Graph, truth: np.ndarray, cfg: ExperimentConfig, scheme: str, rep: int, budgets: list[int]
) -> list[dict]:
    """One repetition of one scheme, clustered at every budget."""
    seed = cfg.seed(rep)
    oracle = QueryOracle(hidden, budget=budgets[-1])
    sampler = make_sampler(scheme, oracle, seed, cfg)
    rows = []
    for b in budgets:
        start = time.perf_counter()
        while sampler.queries < b:
            sampler.step(limit=b - sampler.queries)
        if oracle.queries_used != b:
            raise RuntimeError(f"{scheme}: oracle counted {oracle.queries_used} queries at budget {b}")
        clustering = spectral_clustering(sampler.snapshot().graph, cfg.k, mode=cfg.mode, seed=seed)
        elapsed = (time.perf_counter() - start) * 1000 if cfg.record_timing else 0.0
        rows.append(
            {
                "scheme": scheme,
                "budget": b,
                "rep": rep,
                "seed": seed,
                "purity": purity(clustering, truth),
                "wallMillis": round(elapsed, 3),
            }
        )
    logger.info("%s rep %d: purity %.3f at budget %d", scheme, rep, rows[-1]["purity"], budgets[-1])
    return rows


def _run_cell_args(args: tuple) -> list[dict]:
    return run_cell(*args)


def run_experiment(cfg: ExperimentConfig) -> pd.DataFrame:
    """Long-format results, one row per (scheme, budget, rep), in sorted order."""
    points = load_dataset(cfg)
    hidden = rbf_similarity(points.points, cfg.sigma)
    budgets = cfg.resolve_budgets(hidden.n)
    logger.info(
        "Experiment %s: n=%d, %d schemes, %d budgets up to %d, %d reps",
        cfg.name, hidden.n, len(cfg.schemes), len(budgets), budgets[-1], cfg.repetitions,
    )
    cells = [
        (hidden, points.labels, cfg, scheme, rep, budgets)
        for scheme in cfg.schemes
        for rep in range(cfg.repetitions)
    ]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            batches = list(pool.map(_run_cell_args, cells))
    else:
        batches = [run_cell(*cell) for cell in cells]

    results = pd.DataFrame([row for batch in batches for row in batch], columns=RESULT_COLUMNS)
    order = {scheme: i for i, scheme in enumerate(cfg.schemes)}
    results = results.sort_values(
        ["scheme", "budget", "rep"], key=lambda col: col.map(order) if col.name == "scheme" else col
    )
    return results.reset_index(drop=True)


def aggregate(results: pd.DataFrame) -> pd.DataFrame:
    """Mean and standard deviation of purity per (scheme, budget)."""
    grouped = results.groupby(["scheme", "budget"], sort=False)["purity"]
    agg = grouped.agg(meanPurity="mean", stdPurity="std", reps="count").reset_index()
    agg["stdPurity"] = agg["stdPurity"].fillna(0.0)
    return agg[AGGREGATE_COLUMNS]


def write_outputs(cfg: ExperimentConfig, results: pd.DataFrame) -> Path:
    """results.csv, aggregate.csv and purity_chart.json under the configured output directory."""
    out_dir = Path(cfg.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    results.to_csv(out_dir / "results.csv", index=False)
    agg = aggregate(results)
    agg.to_csv(out_dir / "aggregate.csv", index=False)
    purity_chart(agg, title=cfg.name).save(str(out_dir / "purity_chart.json"))
    logger.info("Wrote %d result rows to %s", len(results), out_dir)
    return out_dir
