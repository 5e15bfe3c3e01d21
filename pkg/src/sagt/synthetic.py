"""Synthetic graphs for tests and end-to-end experiments."""

from __future__ import annotations

import numpy as np

from .graph import Graph


def sbm_graph(block_sizes, p_intra: float, p_inter: float, feature_dim: int = 8,
              shift: float = 2.5, seed: int = 0) -> Graph:
    """Stochastic block model with class-shifted Gaussian features.

    Block k gets features N(mu_k, I) where the mu_k are +/- shift-scaled
    opposite directions for two blocks, or random unit directions scaled by
    shift for more.  Labels equal block membership.
    """
    rng = np.random.default_rng(seed)
    sizes = [int(s) for s in block_sizes]
    n = sum(sizes)
    k = len(sizes)
    labels = np.repeat(np.arange(k), sizes)

    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            p = p_intra if labels[i] == labels[j] else p_inter
            if rng.random() < p:
                edges.append((i, j))

    if k == 2:
        base = np.ones(feature_dim) / np.sqrt(feature_dim)
        means = np.stack([shift * base, -shift * base])
    else:
        dirs = rng.normal(size=(k, feature_dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        means = shift * dirs
    X = means[labels] + rng.normal(size=(n, feature_dim))

    return Graph.from_edge_list(n=n, edge_list=edges, X=X, y=labels, u=k)


def random_graph(n: int, p: float, seed: int = 0, num_classes: int = 2,
                 feature_dim: int = 4) -> Graph:
    """Erdos-Renyi graph with iid standard normal features and random labels."""
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, k=1)
    keep = rng.random(iu[0].shape[0]) < p
    edges = list(zip(iu[0][keep].tolist(), iu[1][keep].tolist()))
    X = rng.normal(size=(n, feature_dim))
    y = rng.integers(0, num_classes, size=n)
    return Graph.from_edge_list(n=n, edge_list=edges, X=X, y=y, u=num_classes)
