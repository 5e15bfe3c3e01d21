"""Graph core: adjacency normalizations, compatibility, dataset metrics."""

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sagt.graph import (Graph, compatibility_matrix, cosine_similarity,
                        dataset_metrics, degree_vector, edge_homophily,
                        local_clustering, pagerank, rw_norm_adjacency,
                        sym_norm_adjacency, sym_norm_adjacency_csr)
from sagt.synthetic import random_graph


def path3(labels=(0, 0, 1), X=((1.0, 0.0), (1.0, 0.0), (0.0, 1.0))):
    return Graph.from_edge_list(3, [(0, 1), (1, 2)], np.array(X),
                                np.array(labels), u=max(labels) + 1)


@st.composite
def graphs(draw, max_n=30):
    n = draw(st.integers(1, max_n))
    density = draw(st.floats(0.0, 0.6))
    seed = draw(st.integers(0, 10_000))
    return random_graph(n, density, seed=seed)


def test_graph_validation():
    with pytest.raises(ValueError, match="out of range"):
        Graph(n=2, edges=frozenset({(0, 5)}), X=np.zeros((2, 1)),
              y=np.zeros(2, dtype=int), u=1)
    with pytest.raises(ValueError, match="self-loop"):
        Graph(n=2, edges=frozenset({(1, 1)}), X=np.zeros((2, 1)),
              y=np.zeros(2, dtype=int), u=1)
    with pytest.raises(ValueError, match="rows"):
        Graph(n=2, edges=frozenset(), X=np.zeros((3, 1)),
              y=np.zeros(2, dtype=int), u=1)


def test_from_edge_list_cleans_input():
    g = Graph.from_edge_list(3, [(0, 1), (1, 0), (2, 2), (0, 1)],
                             np.zeros((3, 1)), np.zeros(3, dtype=int), u=1)
    assert g.edges == frozenset({(0, 1)})


def test_degree_vector_path_and_edgeless():
    assert degree_vector(path3()).tolist() == [1, 2, 1]
    g = Graph.from_edge_list(4, [], np.zeros((4, 1)), np.zeros(4, dtype=int), u=1)
    assert degree_vector(g).tolist() == [0, 0, 0, 0]


@given(graphs())
@settings(max_examples=40, deadline=None)
def test_degree_sum_is_twice_edges(g):
    assert degree_vector(g).sum() == 2 * g.num_edges


def test_sym_norm_single_node():
    g = Graph.from_edge_list(1, [], np.zeros((1, 1)), np.zeros(1, dtype=int), u=1)
    np.testing.assert_array_equal(sym_norm_adjacency(g), [[1.0]])


def test_sym_norm_path_hand_values():
    A = sym_norm_adjacency(path3())
    assert A[0, 0] == pytest.approx(0.5)
    assert A[0, 1] == pytest.approx(1 / np.sqrt(6))
    assert A[1, 1] == pytest.approx(1 / 3)


@given(graphs())
@settings(max_examples=40, deadline=None)
def test_sym_norm_symmetric_and_matches_sparse(g):
    A = sym_norm_adjacency(g)
    np.testing.assert_allclose(A, A.T, atol=1e-12)
    np.testing.assert_allclose(A, sym_norm_adjacency_csr(g).toarray(), atol=1e-12)


def test_sym_norm_spectral_radius_at_most_one():
    g = random_graph(50, 0.1, seed=11)
    A = sym_norm_adjacency(g)
    # power method on the symmetric matrix
    v = np.ones(g.n) / np.sqrt(g.n)
    for _ in range(500):
        w = A @ v
        v = w / np.linalg.norm(w)
    radius = abs(v @ (A @ v))
    assert radius <= 1.0 + 1e-9


def test_rw_norm_rows_and_values():
    g = Graph.from_edge_list(1, [], np.zeros((1, 1)), np.zeros(1, dtype=int), u=1)
    np.testing.assert_array_equal(rw_norm_adjacency(g), [[1.0]])
    A = rw_norm_adjacency(path3())
    np.testing.assert_allclose(A[1], [1 / 3, 1 / 3, 1 / 3])


@given(graphs())
@settings(max_examples=40, deadline=None)
def test_rw_norm_row_stochastic(g):
    np.testing.assert_allclose(rw_norm_adjacency(g).sum(axis=1), 1.0, atol=1e-12)


def test_cosine_similarity_basics():
    assert cosine_similarity([1, 0], [1, 0]) == pytest.approx(1.0)
    assert cosine_similarity([1, 0], [0, 1]) == 0.0
    assert cosine_similarity([0, 0], [1, 1]) == 0.0
    with pytest.raises(ValueError, match="mismatch"):
        cosine_similarity([1, 0], [1, 0, 0])


def test_compatibility_path_example():
    comp = compatibility_matrix(path3(), tau=0.5)
    assert comp.neighbors[0].tolist() == [1]
    assert comp.neighbors[1].tolist() == [0]
    assert comp.neighbors[2].tolist() == []


def test_compatibility_orthogonal_features_high_tau():
    g = Graph.from_edge_list(3, [(0, 1), (1, 2)], np.eye(3),
                             np.zeros(3, dtype=int), u=1)
    comp = compatibility_matrix(g, tau=0.999)
    assert all(len(nb) == 0 for nb in comp.neighbors)


def test_sym_norm_isolated_node_gets_unit_diagonal():
    g = Graph.from_edge_list(3, [(0, 1)], np.zeros((3, 1)),
                             np.zeros(3, dtype=int), u=1)
    A = sym_norm_adjacency(g)
    assert A[2, 2] == 1.0
    assert A[2, 0] == A[2, 1] == 0.0


def test_compatibility_matches_brute_force():
    g = random_graph(200, 0.05, seed=4, feature_dim=6)
    comp = compatibility_matrix(g, tau=0.3)
    for i in range(g.n):
        expected = sorted(
            j for j in range(g.n)
            if j != i and cosine_similarity(g.X[i], g.X[j]) > 0.3
        )
        assert comp.neighbors[i].tolist() == expected
    for i in range(g.n):  # symmetry
        for j in comp.neighbors[i]:
            assert i in comp.neighbors[j]


def test_metrics_triangle_graph():
    g = Graph.from_edge_list(3, [(0, 1), (1, 2), (0, 2)], np.zeros((3, 1)),
                             np.zeros(3, dtype=int), u=1)
    m = dataset_metrics(g)
    assert m.avg_degree == 2.0
    assert m.clustering == 1.0
    assert m.triangles_per_node == 1.0
    assert m.homophily == 1.0


def test_metrics_path_mixed_labels():
    m = dataset_metrics(path3(labels=(0, 0, 1)))
    assert m.homophily == 0.5
    assert m.clustering == 0.0
    assert m.triangles_per_node == 0.0


@given(graphs())
@settings(max_examples=30, deadline=None)
def test_mean_pagerank_is_inverse_n(g):
    m = dataset_metrics(g)
    assert m.mean_pagerank == pytest.approx(1.0 / g.n, abs=1e-9)


@given(graphs())
@settings(max_examples=20, deadline=None)
def test_homophily_identical_labels_is_one(g):
    g2 = Graph(n=g.n, edges=g.edges, X=g.X, y=np.zeros(g.n, dtype=int), u=1)
    assert edge_homophily(g2) == 1.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_metrics_match_networkx(seed):
    g = random_graph(60, 0.08, seed=seed)
    G = nx.Graph()
    G.add_nodes_from(range(g.n))
    G.add_edges_from(g.edges)
    np.testing.assert_allclose(local_clustering(g).mean(),
                               nx.average_clustering(G), atol=1e-12)
    tri_nx = sum(nx.triangles(G).values()) // 3
    assert dataset_metrics(g).triangles_per_node == pytest.approx(
        3 * tri_nx / g.n
    )
    pr_nx = nx.pagerank(G, alpha=0.85, tol=1e-12, max_iter=500)
    pr = pagerank(g)
    np.testing.assert_allclose(pr, [pr_nx[i] for i in range(g.n)], atol=1e-7)


def test_metrics_concurrent_reads_are_consistent():
    # immutability: repeated computation yields identical results
    g = random_graph(40, 0.1, seed=9)
    a = dataset_metrics(g)
    b = dataset_metrics(g)
    assert a == b
    with pytest.raises(ValueError):
        g.X[0, 0] = 5.0
