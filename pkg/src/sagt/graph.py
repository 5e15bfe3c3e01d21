"""Core graph representation, normalized adjacencies, and dataset metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

PAGERANK_DAMPING = 0.85
PAGERANK_TOL = 1e-10


@dataclass(frozen=True)
class Graph:
    """Immutable undirected simple graph with node features and labels.

    Edges are stored as a frozenset of (u, v) tuples with u < v.  Use
    :meth:`from_edge_list` to build one from a raw (possibly duplicated,
    self-looped, or asymmetric) edge list.
    """

    n: int
    edges: frozenset
    X: np.ndarray
    y: np.ndarray
    u: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"node count must be nonnegative, got {self.n}")
        for a, b in self.edges:
            if not (0 <= a < self.n and 0 <= b < self.n):
                raise ValueError(f"edge ({a}, {b}) out of range [0, {self.n})")
            if a == b:
                raise ValueError(f"self-loop ({a}, {a}) not allowed")
            if a > b:
                raise ValueError(f"edge ({a}, {b}) not stored as (min, max)")
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] != self.n:
            raise ValueError(f"X must have {self.n} rows, got shape {X.shape}")
        if y.shape != (self.n,):
            raise ValueError(f"y must have {self.n} entries, got shape {y.shape}")
        if self.n and (y.min() < 0 or y.max() >= self.u):
            raise ValueError(f"labels must lie in [0, {self.u})")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_edge_list(cls, n, edge_list, X, y, u) -> "Graph":
        """Build a Graph, symmetrizing and deduplicating, dropping self-loops."""
        edges = set()
        for a, b in edge_list:
            a, b = int(a), int(b)
            if a == b:
                continue
            edges.add((min(a, b), max(a, b)))
        return cls(n=n, edges=frozenset(edges), X=X, y=y, u=u)

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def edge_array(self) -> np.ndarray:
        """Edges as a (m, 2) int array in deterministic sorted order."""
        if not self.edges:
            return np.zeros((0, 2), dtype=np.int64)
        return np.array(sorted(self.edges), dtype=np.int64)

    def neighbor_lists(self) -> list:
        """Sorted neighbor array per node."""
        nbrs = [[] for _ in range(self.n)]
        for a, b in self.edges:
            nbrs[a].append(b)
            nbrs[b].append(a)
        return [np.array(sorted(v), dtype=np.int64) for v in nbrs]

    def adjacency_csr(self) -> sp.csr_matrix:
        ea = self.edge_array()
        rows = np.concatenate([ea[:, 0], ea[:, 1]])
        cols = np.concatenate([ea[:, 1], ea[:, 0]])
        data = np.ones(rows.shape[0], dtype=np.float64)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))

    def adjacency_dense(self) -> np.ndarray:
        A = np.zeros((self.n, self.n), dtype=np.float64)
        for a, b in self.edges:
            A[a, b] = 1.0
            A[b, a] = 1.0
        return A


@dataclass(frozen=True)
class CompatibilityMatrix:
    """Binary feature-similarity graph stored as per-node neighbor lists.

    Node j is in neighbors[i] exactly when the cosine similarity of the raw
    feature rows i and j exceeds tau.  Symmetric, zero diagonal.
    """

    neighbors: tuple
    tau: float

    @property
    def n(self) -> int:
        return len(self.neighbors)

    def degree(self, i: int) -> int:
        return len(self.neighbors[i])

    def to_csr(self) -> sp.csr_matrix:
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        for i, nb in enumerate(self.neighbors):
            indptr[i + 1] = indptr[i] + len(nb)
        indices = (
            np.concatenate(self.neighbors)
            if indptr[-1] > 0
            else np.zeros(0, dtype=np.int64)
        )
        data = np.ones(indptr[-1], dtype=np.float64)
        return sp.csr_matrix((data, indices, indptr), shape=(self.n, self.n))


@dataclass(frozen=True)
class DatasetMetrics:
    avg_degree: float
    clustering: float
    triangles_per_node: float
    mean_pagerank: float
    homophily: float

    def as_dict(self) -> dict:
        return {
            "avg_degree": self.avg_degree,
            "clustering": self.clustering,
            "triangles_per_node": self.triangles_per_node,
            "mean_pagerank": self.mean_pagerank,
            "homophily": self.homophily,
        }


def degree_vector(g: Graph) -> np.ndarray:
    """Number of neighbors of each node in the original adjacency."""
    deg = np.zeros(g.n, dtype=np.int64)
    for a, b in g.edges:
        deg[a] += 1
        deg[b] += 1
    return deg


def sym_norm_adjacency(g: Graph) -> np.ndarray:
    """D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I."""
    A = g.adjacency_dense()
    np.fill_diagonal(A, 1.0)
    d = A.sum(axis=1)
    dinv_sqrt = 1.0 / np.sqrt(d)
    return A * np.outer(dinv_sqrt, dinv_sqrt)


def sym_norm_adjacency_csr(g: Graph) -> sp.csr_matrix:
    """Sparse variant of :func:`sym_norm_adjacency` for large graphs."""
    A = g.adjacency_csr() + sp.identity(g.n, format="csr")
    d = np.asarray(A.sum(axis=1)).ravel()
    dinv_sqrt = sp.diags(1.0 / np.sqrt(d))
    return (dinv_sqrt @ A @ dinv_sqrt).tocsr()


def rw_norm_adjacency(g: Graph) -> np.ndarray:
    """Row-stochastic D^{-1} (A + I)."""
    A = g.adjacency_dense()
    np.fill_diagonal(A, 1.0)
    return A / A.sum(axis=1, keepdims=True)


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two vectors; 0 if either has zero norm."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def compatibility_matrix(g: Graph, tau: float) -> CompatibilityMatrix:
    """All node pairs whose raw-feature cosine similarity exceeds tau.

    Zero-norm feature rows have similarity 0 to everything by convention.
    """
    norms = np.linalg.norm(g.X, axis=1)
    safe = np.where(norms == 0.0, 1.0, norms)
    Xn = g.X / safe[:, None]
    sims = Xn @ Xn.T
    # mirror the upper triangle so float noise cannot break symmetry
    mask = np.triu(sims > tau, k=1)
    mask = mask | mask.T
    neighbors = tuple(np.flatnonzero(mask[i]).astype(np.int64) for i in range(g.n))
    return CompatibilityMatrix(neighbors=neighbors, tau=tau)


def _triangles_per_vertex(g: Graph) -> np.ndarray:
    nbrs = [set(nb.tolist()) for nb in g.neighbor_lists()]
    tri = np.zeros(g.n, dtype=np.int64)
    for a, b in g.edges:
        common = len(nbrs[a] & nbrs[b])
        tri[a] += common
        tri[b] += common
    # each triangle at node i was counted once per incident edge
    return tri // 2


def local_clustering(g: Graph) -> np.ndarray:
    """Local clustering coefficient per node; degree < 2 contributes 0."""
    deg = degree_vector(g)
    tri = _triangles_per_vertex(g)
    out = np.zeros(g.n, dtype=np.float64)
    ok = deg >= 2
    out[ok] = 2.0 * tri[ok] / (deg[ok] * (deg[ok] - 1.0))
    return out


def pagerank(g: Graph, damping: float = PAGERANK_DAMPING, tol: float = PAGERANK_TOL,
             max_iters: int = 10000) -> np.ndarray:
    """Standard PageRank with uniform teleport; dangling mass spread uniformly."""
    n = g.n
    if n == 0:
        return np.zeros(0)
    deg = degree_vector(g).astype(np.float64)
    A = g.adjacency_csr()
    dangling = deg == 0
    pr = np.full(n, 1.0 / n)
    for _ in range(max_iters):
        share = np.where(dangling, 0.0, pr / np.where(dangling, 1.0, deg))
        nxt = (1.0 - damping) / n + damping * (A.T @ share)
        nxt += damping * pr[dangling].sum() / n
        if np.abs(nxt - pr).sum() < tol:
            return nxt
        pr = nxt
    return pr


def edge_homophily(g: Graph) -> float:
    """Fraction of edges whose endpoints share a label; 1.0 when edgeless."""
    if not g.edges:
        return 1.0
    same = sum(1 for a, b in g.edges if g.y[a] == g.y[b])
    return same / len(g.edges)


def dataset_metrics(g: Graph) -> DatasetMetrics:
    deg = degree_vector(g)
    tri = _triangles_per_vertex(g)
    total_triangles = int(tri.sum()) // 3
    return DatasetMetrics(
        avg_degree=2.0 * g.num_edges / g.n,
        clustering=float(local_clustering(g).mean()),
        triangles_per_node=3.0 * total_triangles / g.n,
        mean_pagerank=float(pagerank(g).mean()),
        homophily=edge_homophily(g),
    )
