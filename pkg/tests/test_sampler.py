"""PPR solver equivalence, probability semantics, and sequence sampling."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from sagt.graph import Graph, sym_norm_adjacency
from sagt.sampler import (ConvergenceError, ppr_row,
                          sample_node_sequences, sample_subgraphs,
                          sampling_matrix)
from sagt.synthetic import random_graph


def path3():
    return Graph.from_edge_list(3, [(0, 1), (1, 2)], np.zeros((3, 1)),
                                np.zeros(3, dtype=int), u=1)


def star4():
    return Graph.from_edge_list(4, [(0, 1), (0, 2), (0, 3)], np.zeros((4, 1)),
                                np.zeros(4, dtype=int), u=1)


def oracle_ppr_rows(g, c, normalize=True):
    """Independent route: explicit linear solve of the damped resolvent."""
    A_hat = sym_norm_adjacency(g)
    n = g.n
    rows = np.zeros((n, n))
    for v in range(n):
        e = np.zeros(n)
        e[v] = 1.0
        r = c * np.linalg.solve(np.eye(n) - (1.0 - c) * A_hat, e)
        rows[v] = r / r.sum() if normalize else r
    return rows


def test_ppr_row_full_damping_is_indicator():
    A = sym_norm_adjacency(path3())
    np.testing.assert_array_equal(ppr_row(A, 1, c=1.0), [0.0, 1.0, 0.0])


def test_ppr_row_single_node():
    g = Graph.from_edge_list(1, [], np.zeros((1, 1)), np.zeros(1, dtype=int), u=1)
    np.testing.assert_allclose(ppr_row(sym_norm_adjacency(g), 0, c=0.3), [1.0])


def test_ppr_row_matches_dense_solve_on_path():
    g = path3()
    A = sym_norm_adjacency(g)
    expected = oracle_ppr_rows(g, 0.15)
    got = ppr_row(A, 0, c=0.15)
    np.testing.assert_allclose(got, expected[0], atol=1e-8)


def test_ppr_row_unnormalized_satisfies_fixed_point():
    g = random_graph(25, 0.15, seed=3)
    A = sym_norm_adjacency(g)
    for v in (0, 7, 24):
        r = ppr_row(A, v, c=0.2, normalize=False)
        e = np.zeros(g.n)
        e[v] = 1.0
        np.testing.assert_allclose(r, 0.2 * e + 0.8 * (A @ r), atol=1e-8)


def test_ppr_row_nonconvergence_reports_residual():
    A = sym_norm_adjacency(random_graph(30, 0.2, seed=0))
    with pytest.raises(ConvergenceError, match="residual"):
        ppr_row(A, 0, c=0.01, max_iters=2)


def test_ppr_row_rejects_bad_damping():
    A = sym_norm_adjacency(path3())
    for c in (0.0, -0.5, 1.5):
        with pytest.raises(ValueError):
            ppr_row(A, 0, c=c)


def test_sampling_matrix_edgeless_is_identity():
    g = Graph.from_edge_list(4, [], np.zeros((4, 1)), np.zeros(4, dtype=int), u=1)
    np.testing.assert_allclose(sampling_matrix(g, 0.15).S, np.eye(4), atol=1e-12)


def test_sampling_matrix_row_sums_on_random_graph():
    g = random_graph(300, 0.02, seed=8)
    S = sampling_matrix(g, 0.15).S
    np.testing.assert_allclose(S.sum(axis=1), 1.0, atol=1e-7)
    assert (S >= 0).all()


def test_sampling_matrix_cycle_is_circulant():
    n = 6
    g = Graph.from_edge_list(n, [(i, (i + 1) % n) for i in range(n)],
                             np.zeros((n, 1)), np.zeros(n, dtype=int), u=1)
    S = sampling_matrix(g, 0.3).S
    for v in range(n):
        np.testing.assert_allclose(S[v], np.roll(S[0], v), atol=1e-9)


@pytest.mark.parametrize("c", [0.15, 0.5, 0.85])
def test_power_iteration_matches_dense_solve(c):
    for seed in range(4):
        g = random_graph(40 + 30 * seed, 0.08, seed=seed)
        S = sampling_matrix(g, c).S
        expected = oracle_ppr_rows(g, c)
        np.testing.assert_allclose(S, expected, atol=1e-8)
        S_dense = sampling_matrix(g, c, method="dense").S
        np.testing.assert_allclose(S_dense, expected, atol=1e-10)


def test_ppr_rows_match_sampling_matrix_rows():
    g = random_graph(35, 0.1, seed=5)
    A = sym_norm_adjacency(g)
    S = sampling_matrix(g, 0.15).S
    for v in (0, 17, 34):
        np.testing.assert_allclose(ppr_row(A, v, 0.15), S[v], atol=1e-8)


def test_self_score_monotone_in_damping_on_path():
    g = path3()
    values = []
    for c in np.arange(0.1, 1.0, 0.1):
        values.append(sampling_matrix(g, float(c)).S[0, 0])
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


def test_sample_path_k1_2_draws_both_neighbors():
    g = path3()
    S = sampling_matrix(g, 0.15)
    for seed in range(5):
        seqs = sample_node_sequences(S, v=1, k1=2, q=1, seed=seed)
        assert sorted(seqs[0].nodes) == [0, 1, 2]
        assert seqs[0].nodes[0] == 1


def test_sample_k1_zero_is_target_only():
    g = path3()
    S = sampling_matrix(g, 0.15)
    for per_node in sample_subgraphs(S, k1=0, q=3, seed=1):
        for seq in per_node:
            assert seq.nodes == (seq.target,)


def test_sample_rejects_k1_too_large():
    S = sampling_matrix(path3(), 0.15)
    with pytest.raises(ValueError, match="k1"):
        sample_subgraphs(S, k1=3, q=1, seed=0)


@given(st.integers(4, 25), st.integers(0, 6), st.integers(1, 3),
       st.integers(0, 100))
@settings(max_examples=40, deadline=None)
def test_sequence_invariants(n, k1, q, seed):
    g = random_graph(n, 0.2, seed=seed)
    k1 = min(k1, n - 1)
    S = sampling_matrix(g, 0.15)
    out = sample_subgraphs(S, k1, q, seed)
    assert len(out) == g.n
    for v, per_node in enumerate(out):
        assert len(per_node) == q
        for seq in per_node:
            assert len(seq.nodes) == k1 + 1
            assert seq.nodes[0] == v
            assert len(set(seq.nodes)) == len(seq.nodes)


def test_sampling_deterministic_and_order_independent():
    g = random_graph(20, 0.15, seed=2)
    S = sampling_matrix(g, 0.15)
    a = sample_subgraphs(S, 4, 3, seed=42)
    b = sample_subgraphs(S, 4, 3, seed=42)
    assert a == b
    # a single node's stream does not depend on other nodes being sampled
    assert sample_node_sequences(S, 13, 4, 3, seed=42) == a[13]
    c = sample_subgraphs(S, 4, 3, seed=43)
    assert a != c


def test_star_leaf_frequencies_match_probabilities():
    g = star4()
    S = sampling_matrix(g, 0.15)
    scores = np.maximum(S.S[0], 0.0).copy()
    scores[0] = 0.0
    p = scores / scores.sum()
    draws = 100_000
    seqs = sample_node_sequences(S, v=0, k1=1, q=draws, seed=123)
    counts = np.zeros(4)
    for seq in seqs:
        assert len(seq.nodes) == 2 and seq.nodes[0] == 0
        counts[seq.nodes[1]] += 1
    assert counts[0] == 0
    result = chisquare(counts[1:], f_exp=draws * p[1:])
    assert result.pvalue > 0.01


def test_weighted_first_draw_matches_unequal_probabilities():
    # path graph gives node 0 unequal PPR mass over {1, 2}
    g = path3()
    S = sampling_matrix(g, 0.15)
    scores = np.maximum(S.S[0], 0.0).copy()
    scores[0] = 0.0
    p = scores / scores.sum()
    assert abs(p[1] - p[2]) > 0.05
    draws = 60_000
    seqs = sample_node_sequences(S, v=0, k1=1, q=draws, seed=7)
    counts = np.bincount([s.nodes[1] for s in seqs], minlength=3)
    result = chisquare(counts[1:], f_exp=draws * p[1:])
    assert result.pvalue > 0.01
