"""Seed-sweep simulations at desk scale; all marked slow.

Run:
  pytest -m slow tests/test_simulations.py
"""

import dataclasses
import logging
from pathlib import Path

import numpy as np
import pytest

from simquery._helpers import edge_count
from simquery.bounds import (
    BoundInputs,
    appendixc_cmin_lower,
    check_implies,
    check_spectral_approximation,
    theorem1_budget,
    theorem2_lower_budget,
)
from simquery.datasets import PlantedGraphSpec, planted_clusterable
from simquery.experiment import aggregate, load_config, run_experiment
from simquery.graph import Graph, laplacian, min_cut, quadratic_form
from simquery.reports import compare_schemes
from simquery.sampling import QueryOracle, uniform_without_replacement
from simquery.spectral import second_smallest_normalized_eigenvalue, sin_theta_check

logger = logging.getLogger(__name__)

EXPERIMENTS = Path(__file__).resolve().parent.parent / "experiments"

pytestmark = pytest.mark.slow


def test_quadratic_form_matches_half_sum_over_pairs(make_random_graph):
    rng = np.random.default_rng(0)
    for seed in range(500):
        n = int(rng.integers(2, 25))
        G = make_random_graph(n, rng.uniform(0.1, 0.9), seed)
        x = rng.normal(size=n)
        half_sum = 0.5 * np.sum(G.W * (x[:, None] - x[None, :]) ** 2)
        assert quadratic_form(G, x) == pytest.approx(half_sum, rel=1e-9, abs=1e-12)


def test_spectral_approximation_implies_relaxed_cut_approximation_up_to_14_vertices(make_connected_graph):
    rng = np.random.default_rng(1)
    counterexamples = 0
    spectral_hits = 0
    for seed in range(200):
        n = int(rng.integers(3, 15))
        G = make_connected_graph(n, 0.5, seed)
        factors = np.triu(rng.uniform(0.7, 1.3, size=(n, n)), 1)
        G_tilde = Graph(G.W * (factors + factors.T), bounded=False)
        eps = float(rng.uniform(0.1, 0.6))
        spectral, cut = check_implies(G, G_tilde, eps)
        if spectral.holds:
            spectral_hits += 1
            counterexamples += not cut.holds
    logger.info("spectral approximation held in %d of 200 pairs", spectral_hits)
    assert spectral_hits > 0
    assert counterexamples == 0


def test_bridge_is_missed_below_the_lower_threshold(make_two_cliques):
    G = make_two_cliques(10, bridge=1.0)
    delta = 0.5
    m = int(0.5 * theorem2_lower_budget(G.n, 1.0, delta))
    misses = sum(
        (0, 10) not in uniform_without_replacement(QueryOracle(G), m, seed=s).observed for s in range(10_000)
    )
    assert misses / 10_000 > delta


def test_spectral_budget_on_dense_random_graphs(make_connected_graph):
    n, eps, delta = 40, 0.5, 0.1
    holds = capped = 0
    for seed in range(100):
        G = make_connected_graph(n, 0.8, seed)
        inp = BoundInputs(
            n=n,
            min_degree=float(laplacian(G).degrees.min()),
            lambda2=second_smallest_normalized_eigenvalue(G),
            epsilon=eps,
            delta=delta,
        )
        m = theorem1_budget(inp)
        if m >= edge_count(n):
            capped += 1
            m = edge_count(n)
        sampled = uniform_without_replacement(QueryOracle(G), m, seed=seed)
        holds += check_spectral_approximation(G, sampled.graph, eps).holds
    logger.info("spectral budget capped at full observation in %d of 100 graphs", capped)
    assert holds >= 90


def test_observed_min_cut_lower_bound_on_planted_graphs():
    delta = 0.05
    hits = 0
    for seed in range(100):
        spec = PlantedGraphSpec((12, 12), within_prob=0.8, cross_model="binary", cross_edges=3, seed=seed)
        G, _ = planted_clusterable(spec)
        c, _ = min_cut(G)
        sampled = uniform_without_replacement(QueryOracle(G), edge_count(G.n) // 2, seed=seed)
        c_tilde, _ = min_cut(sampled.graph)
        if c_tilde == 0:
            hits += 1
            continue
        hits += appendixc_cmin_lower(sampled.p, c_tilde, delta) <= c
    assert hits >= 95


def test_sin_theta_bound_on_planted_clusterable_graphs():
    for seed in range(50):
        spec = PlantedGraphSpec((15, 15, 15), within_prob=0.8, cross_model="binary", cross_edges=1, seed=seed)
        G, structure = planted_clusterable(spec)
        sampled = uniform_without_replacement(QueryOracle(G), edge_count(G.n) // 2, seed=seed).graph
        report = sin_theta_check(sampled, structure)
        assert report.holds, f"seed {seed}: sin theta {report.sin_theta} above bound {report.bound}"


@pytest.mark.parametrize("config", ["gaussians.yml", "half_circles.yml"])
def test_clus2k_keeps_pace_with_uniform_on_shipped_configs(config):
    cfg = dataclasses.replace(load_config(EXPERIMENTS / config), workers=1)
    agg = aggregate(run_experiment(cfg))
    table = compare_schemes(agg, "clus2k", "uniform")
    assert table["wins"].mean() >= 0.8
    if cfg.dataset == "gaussians":
        top = agg[agg["budget"] == agg["budget"].max()]
        assert (top["meanPurity"] >= 0.95).all()
