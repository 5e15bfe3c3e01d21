"""Feature enrichment: compatibility-graph amplification, degree scores,
and class-centric concatenation, fused into the 3d-wide training matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .graph import CompatibilityMatrix, Graph, degree_vector


@dataclass(frozen=True)
class GcnParams:
    """Per-layer weight matrices of the amplification network."""

    weights: tuple

    def __post_init__(self):
        for a, b in zip(self.weights, self.weights[1:]):
            if a.shape[1] != b.shape[0]:
                raise ValueError(
                    f"layer widths do not chain: {a.shape} then {b.shape}"
                )

    @property
    def layers(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class EnrichedFeatures:
    X_deg: np.ndarray
    X_sim: np.ndarray
    X_final: np.ndarray
    class_reps: np.ndarray


def compat_norm_csr(comp: CompatibilityMatrix) -> sp.csr_matrix:
    """Symmetrically normalized compatibility-plus-self matrix.

    Node degrees count the node itself, matching the aggregation over
    C(i) united with {i}.
    """
    C = comp.to_csr() + sp.identity(comp.n, format="csr")
    d = np.array([comp.degree(i) + 1 for i in range(comp.n)], dtype=np.float64)
    dinv_sqrt = sp.diags(1.0 / np.sqrt(d))
    return (dinv_sqrt @ C @ dinv_sqrt).tocsr()


def gcn_amplify(g: Graph, comp: CompatibilityMatrix, params: GcnParams,
                layers: int | None = None) -> np.ndarray:
    """Sigmoid message passing over the compatibility graph; returns P."""
    if layers is None:
        layers = params.layers
    if layers != params.layers:
        raise ValueError(f"requested {layers} layers but params hold {params.layers}")
    if params.weights and params.weights[0].shape[0] != g.d:
        raise ValueError(
            f"first layer expects width {params.weights[0].shape[0]}, "
            f"features have {g.d}"
        )
    C_hat = compat_norm_csr(comp)
    H = g.X
    for W in params.weights:
        if H.shape[1] != W.shape[0]:
            raise ValueError(f"width mismatch: H {H.shape} vs W {W.shape}")
        H = expit(C_hat @ H @ W)
    return H


def connection_aware(P: np.ndarray, deg: np.ndarray,
                     normalize: bool = False) -> np.ndarray:
    """Broadcast-add each node's degree score to its amplified features."""
    P = np.asarray(P, dtype=np.float64)
    deg = np.asarray(deg, dtype=np.float64)
    if deg.shape != (P.shape[0],):
        raise ValueError(f"degree vector {deg.shape} does not match P rows {P.shape}")
    if normalize and deg.size and deg.max() > 0:
        deg = deg / deg.max()
    return P + deg[:, None]


def class_representatives(g: Graph, train_nodes) -> np.ndarray:
    """Mean raw-feature row per class over the given training nodes."""
    train_nodes = np.asarray(train_nodes)
    if train_nodes.dtype == bool:
        train_nodes = np.flatnonzero(train_nodes)
    reps = np.zeros((g.u, g.d))
    for k in range(g.u):
        members = train_nodes[g.y[train_nodes] == k]
        if members.size == 0:
            raise ValueError(f"class {k} has no training nodes")
        reps[k] = g.X[members].mean(axis=0)
    return reps


def class_centric_concat(g: Graph, class_reps: np.ndarray) -> np.ndarray:
    """Append each node's most cosine-similar class representative."""
    norms = np.linalg.norm(g.X, axis=1)
    Xn = g.X / np.where(norms == 0.0, 1.0, norms)[:, None]
    rnorms = np.linalg.norm(class_reps, axis=1)
    Rn = class_reps / np.where(rnorms == 0.0, 1.0, rnorms)[:, None]
    sims = Xn @ Rn.T
    best = sims.argmax(axis=1)  # ties resolve to the lowest class index
    return np.hstack([g.X, class_reps[best]])


def fuse(X_deg: np.ndarray, X_sim: np.ndarray) -> np.ndarray:
    if X_deg.shape[0] != X_sim.shape[0]:
        raise ValueError(
            f"row mismatch: X_deg has {X_deg.shape[0]}, X_sim has {X_sim.shape[0]}"
        )
    return np.hstack([X_deg, X_sim])


def enrich(g: Graph, comp: CompatibilityMatrix, params: GcnParams, train_nodes,
           class_reps_scope: str = "train", deg_norm: bool = False,
           P: np.ndarray | None = None) -> EnrichedFeatures:
    """Full enrichment pass; pass P to reuse a precomputed amplification."""
    if P is None:
        P = gcn_amplify(g, comp, params)
    X_deg = connection_aware(P, degree_vector(g), normalize=deg_norm)
    if class_reps_scope == "train":
        reps = class_representatives(g, train_nodes)
    elif class_reps_scope == "all":
        reps = class_representatives(g, np.arange(g.n))
    else:
        raise ValueError(f"class_reps_scope must be 'train' or 'all', "
                         f"got {class_reps_scope!r}")
    X_sim = class_centric_concat(g, reps)
    return EnrichedFeatures(
        X_deg=X_deg, X_sim=X_sim, X_final=fuse(X_deg, X_sim), class_reps=reps
    )
