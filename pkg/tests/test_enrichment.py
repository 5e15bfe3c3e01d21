"""Feature enrichment: amplification, degree scores, class-centric concat."""

import numpy as np
import pytest
from scipy.special import expit

from sagt.enrichment import (EnrichedFeatures, GcnParams, class_centric_concat,
                             class_representatives, connection_aware, enrich,
                             fuse, gcn_amplify)
from sagt.graph import Graph, compatibility_matrix, degree_vector
from sagt.synthetic import random_graph


def path3():
    X = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    return Graph.from_edge_list(3, [(0, 1), (1, 2)], X, np.array([0, 0, 1]), u=2)


def identity_params(d, layers=1):
    return GcnParams(weights=tuple(np.eye(d) for _ in range(layers)))


def dense_amplify_oracle(g, comp, params):
    """Dense-matrix route: explicitly normalized compatibility-plus-self."""
    C = np.zeros((g.n, g.n))
    for i, nbrs in enumerate(comp.neighbors):
        C[i, nbrs] = 1.0
    C += np.eye(g.n)
    d = C.sum(axis=1)
    C_hat = C / np.sqrt(np.outer(d, d))
    H = g.X
    for W in params.weights:
        H = expit(C_hat @ H @ W)
    return H


def test_gcn_params_validate_chaining():
    with pytest.raises(ValueError, match="chain"):
        GcnParams(weights=(np.zeros((3, 4)), np.zeros((5, 3))))


def test_amplify_isolated_node_identity_weights():
    g = Graph.from_edge_list(1, [], np.array([[0.0, 1.0]]),
                             np.zeros(1, dtype=int), u=1)
    comp = compatibility_matrix(g, tau=0.5)
    P = gcn_amplify(g, comp, identity_params(2))
    np.testing.assert_allclose(P, [[0.5, 0.7310585786300049]])


def test_amplify_zero_weights_give_half():
    g = random_graph(12, 0.3, seed=0, feature_dim=3)
    comp = compatibility_matrix(g, tau=0.2)
    P = gcn_amplify(g, comp, GcnParams(weights=(np.zeros((3, 3)),)))
    np.testing.assert_array_equal(P, np.full((12, 3), 0.5))


def test_amplify_symmetric_pair_has_identical_rows():
    X = np.array([[1.0, 2.0], [1.0, 2.0]])
    g = Graph.from_edge_list(2, [(0, 1)], X, np.zeros(2, dtype=int), u=1)
    comp = compatibility_matrix(g, tau=0.5)
    assert comp.neighbors[0].tolist() == [1]
    P = gcn_amplify(g, comp, identity_params(2, layers=2))
    np.testing.assert_allclose(P[0], P[1], atol=1e-15)


def test_amplify_matches_dense_oracle():
    rng = np.random.default_rng(6)
    for seed in range(3):
        g = random_graph(60, 0.1, seed=seed, feature_dim=5)
        comp = compatibility_matrix(g, tau=0.1)
        params = GcnParams(weights=(rng.normal(size=(5, 7)),
                                    rng.normal(size=(7, 5))))
        got = gcn_amplify(g, comp, params)
        np.testing.assert_allclose(got, dense_amplify_oracle(g, comp, params),
                                   atol=1e-10)


def test_amplify_output_strictly_inside_unit_interval():
    g = random_graph(30, 0.2, seed=1, feature_dim=4)
    comp = compatibility_matrix(g, tau=0.0)
    rng = np.random.default_rng(2)
    P = gcn_amplify(g, comp, GcnParams(weights=(rng.normal(size=(4, 4)),)))
    assert (P > 0).all() and (P < 1).all()


def test_amplify_dimension_mismatch_errors():
    g = path3()
    comp = compatibility_matrix(g, tau=0.5)
    with pytest.raises(ValueError, match="width"):
        gcn_amplify(g, comp, GcnParams(weights=(np.zeros((5, 5)),)))
    with pytest.raises(ValueError, match="layers"):
        gcn_amplify(g, comp, identity_params(2), layers=3)


def test_connection_aware_broadcast():
    np.testing.assert_array_equal(
        connection_aware(np.array([[0.5, 0.5]]), np.array([2])), [[2.5, 2.5]]
    )
    P = np.array([[0.1, 0.2]])
    np.testing.assert_array_equal(connection_aware(P, np.array([0])), P)
    with pytest.raises(ValueError, match="degree"):
        connection_aware(np.zeros((3, 2)), np.zeros(2))


def test_connection_aware_path_offsets():
    g = path3()
    P = np.full((3, 2), 0.25)
    X_deg = connection_aware(P, degree_vector(g))
    np.testing.assert_array_equal(X_deg[1] - X_deg[0], [1.0, 1.0])
    np.testing.assert_array_equal(X_deg[1] - X_deg[2], [1.0, 1.0])


def test_connection_aware_normalized_flag():
    P = np.zeros((2, 2))
    out = connection_aware(P, np.array([1, 4]), normalize=True)
    np.testing.assert_array_equal(out, [[0.25, 0.25], [1.0, 1.0]])


def test_class_representatives_means_and_errors():
    X = np.array([[1.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 2.0]])
    g = Graph.from_edge_list(4, [], X, np.array([0, 0, 1, 1]), u=2)
    reps = class_representatives(g, np.arange(4))
    np.testing.assert_array_equal(reps, [[1.0, 0.0], [1.0, 1.0]])
    with pytest.raises(ValueError, match="class 1"):
        class_representatives(g, np.array([0, 1]))


def test_class_centric_concat_picks_most_similar():
    g = path3()
    reps = class_representatives(g, np.arange(3))
    X_sim = class_centric_concat(g, reps)
    assert X_sim.shape == (3, 4)
    np.testing.assert_array_equal(X_sim[2, 2:], reps[1])  # cosines (0, 1)
    np.testing.assert_array_equal(X_sim[0, 2:], reps[0])


def test_class_centric_concat_zero_feature_ties_to_class_zero():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    g = Graph.from_edge_list(3, [], X, np.array([0, 0, 1]), u=2)
    reps = class_representatives(g, np.array([1, 2]))
    X_sim = class_centric_concat(g, reps)
    np.testing.assert_array_equal(X_sim[0, 2:], reps[0])


def test_class_centric_appended_block_is_bit_exact():
    g = random_graph(40, 0.1, seed=3, feature_dim=6, num_classes=3)
    reps = class_representatives(g, np.arange(g.n))
    X_sim = class_centric_concat(g, reps)
    for i in range(g.n):
        block = X_sim[i, 6:]
        assert any(np.array_equal(block, reps[k]) for k in range(3))


def test_concat_never_reads_non_training_labels():
    g = random_graph(30, 0.1, seed=7, feature_dim=5, num_classes=3)
    train = np.arange(0, 18)
    reps = class_representatives(g, train)
    X_sim = class_centric_concat(g, reps)
    mutated = np.array(g.y)
    mutated[18:] = (mutated[18:] + 1) % 3
    g2 = Graph(n=g.n, edges=g.edges, X=g.X, y=mutated, u=3)
    reps2 = class_representatives(g2, train)
    np.testing.assert_array_equal(reps, reps2)
    np.testing.assert_array_equal(X_sim, class_centric_concat(g2, reps2))


def test_fuse_layout_and_errors():
    X_deg = np.arange(6.0).reshape(3, 2)
    X_sim = np.arange(12.0).reshape(3, 4)
    X_final = fuse(X_deg, X_sim)
    assert X_final.shape == (3, 6)
    np.testing.assert_array_equal(X_final[:, :2], X_deg)
    np.testing.assert_array_equal(X_final[:, 2:], X_sim)
    with pytest.raises(ValueError, match="row"):
        fuse(np.zeros((2, 2)), np.zeros((3, 4)))


def test_enrich_assembles_all_blocks():
    g = path3()
    comp = compatibility_matrix(g, tau=0.5)
    out = enrich(g, comp, identity_params(2), np.arange(3))
    assert isinstance(out, EnrichedFeatures)
    assert out.X_final.shape == (3, 6)
    np.testing.assert_array_equal(out.X_final[:, :2], out.X_deg)
    np.testing.assert_array_equal(out.X_final[:, 2:], out.X_sim)
    assert out.class_reps.shape == (2, 2)
    with pytest.raises(ValueError, match="class_reps_scope"):
        enrich(g, comp, identity_params(2), np.arange(3), class_reps_scope="x")
