"""Personalized-PageRank sampling matrix and per-node subgraph sequences.

Scores come from the damped resolvent of the symmetrically normalized
adjacency (with self-loops).  On irregular graphs that solution is not
mass-conserving, so rows are renormalized to probability vectors; pass
``normalize=False`` to get the raw fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import Graph, sym_norm_adjacency_csr

PPR_TOL = 1e-8
PPR_MAX_ITERS = 1000


class ConvergenceError(RuntimeError):
    """Power iteration failed to reach tolerance; message carries the residual."""


@dataclass(frozen=True)
class SamplingMatrix:
    """Row v holds the PPR probability vector personalized at v."""

    S: np.ndarray
    c: float

    @property
    def n(self) -> int:
        return self.S.shape[0]


@dataclass(frozen=True)
class SubgraphSequence:
    """Ordered node ids of one sampled subgraph; the target comes first."""

    nodes: tuple
    target: int

    def __post_init__(self):
        if not self.nodes or self.nodes[0] != self.target:
            raise ValueError(f"sequence must start with target {self.target}")

    def __len__(self):
        return len(self.nodes)


def _check_damping(c: float) -> None:
    if not 0.0 < c <= 1.0:
        raise ValueError(f"damping factor must lie in (0, 1], got {c}")


def ppr_row(A_hat, v: int, c: float, tol: float = PPR_TOL,
            max_iters: int = PPR_MAX_ITERS, normalize: bool = True) -> np.ndarray:
    """One PPR vector by power iteration r <- c e_v + (1-c) A_hat r.

    A_hat may be dense or scipy-sparse.  Raises ConvergenceError when the
    L1 change is still above tol after max_iters sweeps.
    """
    _check_damping(c)
    n = A_hat.shape[0]
    r = np.zeros(n)
    r[v] = 1.0
    if c == 1.0:
        return r
    for _ in range(max_iters):
        nxt = (1.0 - c) * (A_hat @ r)
        nxt[v] += c
        delta = np.abs(nxt - r).sum()
        r = nxt
        if delta < tol:
            if normalize:
                r = r / r.sum()
            return r
    raise ConvergenceError(
        f"ppr_row(v={v}, c={c}) residual {delta:.3e} after {max_iters} iterations"
    )


def dense_ppr_matrix(A_hat, c: float, normalize: bool = True) -> np.ndarray:
    """Direct linear solve of the resolvent; rows are the PPR vectors."""
    _check_damping(c)
    A_hat = A_hat.toarray() if sp.issparse(A_hat) else np.asarray(A_hat)
    n = A_hat.shape[0]
    S = c * np.linalg.solve(np.eye(n) - (1.0 - c) * A_hat, np.eye(n)).T
    if normalize:
        S = S / S.sum(axis=1, keepdims=True)
    return S


def sampling_matrix(g: Graph, c: float, tol: float = PPR_TOL,
                    max_iters: int = PPR_MAX_ITERS,
                    method: str = "power") -> SamplingMatrix:
    """PPR matrix for every node at once.

    "power" iterates all rows simultaneously against the sparse normalized
    adjacency; "dense" solves the linear system (test oracle, n <= 2000).
    """
    _check_damping(c)
    A_hat = sym_norm_adjacency_csr(g)
    if method == "dense":
        return SamplingMatrix(S=dense_ppr_matrix(A_hat, c), c=c)
    if method != "power":
        raise ValueError(f"unknown method {method!r}")
    n = g.n
    S = np.eye(n)
    if c < 1.0:
        At = A_hat.T.tocsr()
        for _ in range(max_iters):
            nxt = (1.0 - c) * (S @ At)
            nxt[np.arange(n), np.arange(n)] += c
            delta = np.abs(nxt - S).sum(axis=1).max()
            S = nxt
            if delta < tol:
                break
        else:
            raise ConvergenceError(
                f"sampling_matrix(c={c}) residual {delta:.3e} "
                f"after {max_iters} iterations"
            )
        S = S / S.sum(axis=1, keepdims=True)
    return SamplingMatrix(S=S, c=c)


def _node_rng(seed: int, node: int) -> np.random.Generator:
    # counter-based Philox keyed on (seed, node id): order-independent streams
    key = np.array([seed, node], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _ranked_ids(scores: np.ndarray) -> np.ndarray:
    """All ids by descending score, ties broken toward the lower id."""
    n = scores.shape[0]
    return np.lexsort((np.arange(n), -scores))


def sample_node_sequences(S: SamplingMatrix, v: int, k1: int, q: int,
                          seed: int) -> list:
    """q subgraph sequences of k1+1 nodes for one target node."""
    n = S.n
    if k1 >= n:
        raise ValueError(f"k1 must be smaller than the node count, got {k1} >= {n}")
    if k1 < 0 or q < 1:
        raise ValueError(f"need k1 >= 0 and q >= 1, got k1={k1}, q={q}")
    masked = S.S[v].copy()
    masked[v] = -np.inf
    ranked = _ranked_ids(masked)
    top_neighbors = ranked[:k1]

    s = np.maximum(S.S[v], 0.0)
    s[v] = 0.0
    positive = int((s > 0).sum())
    r = min(positive, k1)
    p = s / s.sum() if r > 0 else None

    rng = _node_rng(seed, v)
    out = []
    for _ in range(q):
        drawn = rng.choice(n, size=r, replace=False, p=p) if r > 0 else np.empty(
            0, dtype=np.int64
        )
        chosen = set(drawn.tolist())
        pool = [t for t in top_neighbors.tolist() if t not in chosen]
        need = k1 - r
        fill = list(rng.choice(len(pool), size=min(need, len(pool)),
                               replace=False)) if need and pool else []
        fill = [pool[i] for i in fill]
        seq = [v] + drawn.tolist() + fill
        if len(seq) < k1 + 1:
            # pool exhausted: take best-scoring unused ids graph-wide
            used = set(seq)
            extras = [t for t in ranked.tolist() if t not in used]
            seq.extend(extras[: k1 + 1 - len(seq)])
        while len(seq) < k1 + 1:
            # degenerate tiny graph: pad with the target, duplicates allowed
            seq.append(v)
        out.append(SubgraphSequence(nodes=tuple(int(i) for i in seq), target=v))
    return out


def sample_subgraphs(S: SamplingMatrix, k1: int, q: int, seed: int) -> list:
    """Per-node lists of q sequences; node streams are independent of order."""
    return [sample_node_sequences(S, v, k1, q, seed) for v in range(S.n)]
