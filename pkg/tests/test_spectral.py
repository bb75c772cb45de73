import itertools

import numpy as np
import pytest

from simquery.datasets import PlantedGraphSpec, gaussian_blobs, planted_clusterable, purity, rbf_similarity
from simquery.graph import ClusterStructure, Graph, laplacian
from simquery.sampling import QueryOracle, uniform_without_replacement
from simquery.spectral import (
    Clustering,
    cluster_indicator_basis,
    embedding,
    second_smallest_normalized_eigenvalue,
    second_smallest_unnormalized,
    sin_theta_check,
    sin_theta_distance,
    smallest_eigenpairs,
    spectral_clustering,
)


def _complete(n):
    W = np.ones((n, n))
    np.fill_diagonal(W, 0.0)
    return Graph(W)


def _path(n):
    W = np.zeros((n, n))
    idx = np.arange(n - 1)
    W[idx, idx + 1] = W[idx + 1, idx] = 1.0
    return Graph(W)


def _rotation(theta):
    return np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])


def test_zero_eigenvalue_multiplicity_is_component_count(make_two_cliques):
    L = laplacian(make_two_cliques(4)).L
    values = smallest_eigenpairs(L, 3).eigenvalues
    np.testing.assert_allclose(values[:2], 0.0, atol=1e-9)
    assert values[2] > 1e-6


def test_complete_graph_normalized_lambda2():
    assert second_smallest_normalized_eigenvalue(_complete(10)) == pytest.approx(10 / 9, rel=1e-9)
    values = smallest_eigenpairs(laplacian(_complete(10)).normalized, 2).eigenvalues
    assert values[1] == pytest.approx(10 / 9, rel=1e-9)


def test_path_eigenvalues_match_dense_solve():
    L = laplacian(_path(5)).L
    summary = smallest_eigenpairs(L, 5)
    np.testing.assert_allclose(summary.eigenvalues, np.linalg.eigvalsh(L), atol=1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_eigenpairs_are_orthonormal_with_small_residual(make_random_graph, seed):
    L = laplacian(make_random_graph(15, 0.4, seed)).L
    summary = smallest_eigenpairs(L, 4)
    U, vals = summary.eigenvectors, summary.eigenvalues
    assert np.all(np.diff(vals) >= -1e-12)
    np.testing.assert_allclose(U.T @ U, np.eye(4), atol=1e-8)
    residual = np.linalg.norm(L @ U - U * vals, axis=0)
    assert residual.max() <= 1e-7 * np.linalg.norm(L, 2)


def test_warm_start_agrees_with_dense_solve(make_connected_graph):
    G = make_connected_graph(40, 0.3, seed=1)
    L = laplacian(G).L
    dense = smallest_eigenpairs(L, 3)
    perturbed = G.W.copy()
    perturbed[0, 5] = perturbed[5, 0] = 0.5
    L2 = laplacian(Graph(perturbed)).L
    warm = smallest_eigenpairs(L2, 3, initial=dense.eigenvectors)
    np.testing.assert_allclose(warm.eigenvalues, np.linalg.eigvalsh(L2)[:3], atol=1e-7)
    np.testing.assert_allclose(warm.eigenvectors.T @ warm.eigenvectors, np.eye(3), atol=1e-8)


def test_smallest_eigenpairs_rejects_bad_k():
    L = laplacian(_path(4)).L
    with pytest.raises(ValueError):
        smallest_eigenpairs(L, 5)
    with pytest.raises(ValueError):
        smallest_eigenpairs(L, 0)


def test_clustering_validates_ids():
    with pytest.raises(ValueError):
        Clustering(np.array([0, 1, 2]), k=2)
    with pytest.raises(ValueError):
        Clustering(np.array([0, 0]), k=0)
    c = Clustering(np.array([0, 0, 1]), k=3)
    assert c.n_clusters == 2


@pytest.mark.parametrize("mode", ["unnormalized", "normalized"])
def test_two_cliques_are_separated(make_two_cliques, mode):
    clustering = spectral_clustering(make_two_cliques(5), 2, mode=mode, seed=0)
    np.testing.assert_array_equal(clustering.labels, [0] * 5 + [1] * 5)


def test_k_equal_n_gives_singletons(make_random_graph):
    clustering = spectral_clustering(make_random_graph(6, seed=0), 6)
    np.testing.assert_array_equal(clustering.labels, np.arange(6))
    assert purity(clustering, np.arange(6) % 2) == 1.0


def test_spectral_clustering_is_deterministic(make_random_graph):
    G = make_random_graph(20, 0.3, seed=4)
    a = spectral_clustering(G, 3, seed=7)
    b = spectral_clustering(G, 3, seed=7)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_normalized_embedding_rows_are_unit_or_zero(make_connected_graph):
    W = make_connected_graph(10, 0.5, seed=2).W.copy()
    W[9, :] = W[:, 9] = 0.0
    U = embedding(Graph(W), 3, mode="normalized")
    norms = np.linalg.norm(U, axis=1)
    assert norms[9] == pytest.approx(1.0) or norms[9] == 0.0
    np.testing.assert_allclose(norms[:9], 1.0)


def test_unknown_mode_rejected(make_random_graph):
    with pytest.raises(ValueError, match="mode"):
        embedding(make_random_graph(5), 2, mode="symmetric")


@pytest.mark.parametrize("seed", range(5))
def test_well_separated_gaussians_are_recovered(seed):
    points = gaussian_blobs(25, std=1.0, seed=seed)
    G = rbf_similarity(points.points, sigma=2.0)
    clustering = spectral_clustering(G, 4, seed=seed)
    assert purity(clustering, points.labels) >= 0.99


def test_sin_theta_identical_and_orthogonal():
    P = np.eye(4)[:, :2]
    assert sin_theta_distance(P, P) == pytest.approx(0.0, abs=1e-12)
    assert sin_theta_distance(P, np.eye(4)[:, 2:]) == pytest.approx(1.0)


def test_sin_theta_planar_rotation():
    theta = 0.3
    P = np.array([1.0, 0.0])
    Q = np.array([np.cos(theta), np.sin(theta)])
    assert sin_theta_distance(P, Q) == pytest.approx(np.sin(0.3), rel=1e-9)
    assert sin_theta_distance(P, Q) == pytest.approx(0.29552, abs=1e-5)


def test_sin_theta_symmetry_and_rotation_invariance():
    rng = np.random.default_rng(0)
    P, _ = np.linalg.qr(rng.normal(size=(6, 2)))
    Q, _ = np.linalg.qr(rng.normal(size=(6, 2)))
    d = sin_theta_distance(P, Q)
    assert sin_theta_distance(Q, P) == pytest.approx(d, abs=1e-8)
    assert sin_theta_distance(P @ _rotation(1.1), Q) == pytest.approx(d, abs=1e-8)
    assert sin_theta_distance(P, Q @ _rotation(-0.4)) == pytest.approx(d, abs=1e-8)


def test_sin_theta_rejects_bad_bases():
    P = np.eye(3)[:, :2]
    with pytest.raises(ValueError, match="orthonormal"):
        sin_theta_distance(P * 2, P)
    with pytest.raises(ValueError, match="shape"):
        sin_theta_distance(P, np.eye(3)[:, :1])


def test_second_smallest_eigenvalues(make_two_cliques):
    assert second_smallest_normalized_eigenvalue(make_two_cliques(3)) == pytest.approx(0.0, abs=1e-9)
    assert second_smallest_unnormalized(_complete(6)) == pytest.approx(6.0, rel=1e-9)
    with pytest.raises(ValueError):
        second_smallest_unnormalized(Graph.empty(1))


@pytest.mark.parametrize("seed", range(8))
def test_mu2_at_least_lambda2_times_min_degree(make_connected_graph, seed):
    G = make_connected_graph(12, 0.4, seed)
    d = laplacian(G).degrees.min()
    mu2 = second_smallest_unnormalized(G)
    lam2 = second_smallest_normalized_eigenvalue(G)
    assert mu2 >= lam2 * d - 1e-9 * max(1.0, mu2)


def test_cluster_indicator_basis():
    P = cluster_indicator_basis(np.array([0, 1, 0, 1, 1]), 2)
    np.testing.assert_allclose(P.T @ P, np.eye(2))
    np.testing.assert_allclose(P[:, 1], np.array([0, 1, 0, 1, 1]) / np.sqrt(3))
    with pytest.raises(ValueError, match="empty"):
        cluster_indicator_basis(np.array([0, 0, 2]), 3)


@pytest.mark.parametrize("seed, m", itertools.product(range(4), [150, 300, 435]))
def test_sin_theta_bound_on_sampled_clusterable_graphs(seed, m):
    spec = PlantedGraphSpec((10, 10, 10), within_prob=0.8, cross_model="binary", cross_edges=2, seed=seed)
    G, structure = planted_clusterable(spec)
    sampled = uniform_without_replacement(QueryOracle(G), m, seed=seed).graph
    report = sin_theta_check(sampled, structure)
    assert report.holds
    assert 0.0 <= report.sin_theta <= 1.0
    assert report.out_norm >= 0.0


def test_sin_theta_bound_is_zero_without_cross_edges(make_two_cliques):
    G = make_two_cliques(5)
    structure = ClusterStructure.from_labels(G, np.repeat([0, 1], 5))
    report = sin_theta_check(G, structure)
    assert report.out_norm == 0.0
    assert report.sin_theta == pytest.approx(0.0, abs=1e-7)
    assert report.holds
