"""Structure-aware multi-head-attention transformer over subgraph sequences.

Attention logits receive a per-head bias: a learnable mixture of
reachability matrices (powers of the row-stochastic normalized adjacency)
gathered at the sequence's node ids.  The target node sits at position 0
and its final-layer token is the readout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .graph import Graph, rw_norm_adjacency

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    hidden: int = 128
    layers: int = 3
    heads: int = 4
    dropout: float = 0.3
    M: int = 4
    k1: int = 15
    q: int = 5

    def __post_init__(self):
        for name in ("hidden", "layers", "heads", "M", "q"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.k1 < 0:
            raise ValueError("k1 must be nonnegative")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.hidden % self.heads != 0:
            raise ValueError(
                f"heads ({self.heads}) must divide hidden ({self.hidden})"
            )

    def as_dict(self) -> dict:
        return {
            "hidden": self.hidden, "layers": self.layers, "heads": self.heads,
            "dropout": self.dropout, "M": self.M, "k1": self.k1, "q": self.q,
        }


@dataclass(frozen=True)
class StructuralEncoding:
    """Reachability matrices for orders 0 .. M-2; the last mixture slot is 0."""

    M: int
    n: int
    powers: tuple  # (I, A_tilde, A_tilde^2, ...), exactly M-1 entries


def build_structural_encoding(g: Graph, M: int) -> StructuralEncoding:
    if M < 1:
        raise ValueError(f"M must be positive, got {M}")
    powers = []
    if M >= 2:
        A_tilde = rw_norm_adjacency(g)
        powers.append(np.eye(g.n))
        for _ in range(M - 2):
            powers.append(powers[-1] @ A_tilde)
    return StructuralEncoding(M=M, n=g.n, powers=tuple(powers))


def bias_stack(enc: StructuralEncoding, seqs: np.ndarray) -> np.ndarray:
    """Constant (..., M, s, s) stack of encoding values at the sequence ids."""
    seqs = np.asarray(seqs, dtype=np.int64)
    if seqs.size and (seqs.min() < 0 or seqs.max() >= enc.n):
        raise ValueError(f"sequence ids must lie in [0, {enc.n})")
    s = seqs.shape[-1]
    out = np.zeros(seqs.shape[:-1] + (enc.M, s, s))
    rows = seqs[..., :, None]
    cols = seqs[..., None, :]
    for m, P in enumerate(enc.powers):
        out[..., m, :, :] = P[rows, cols]
    return out


def structural_bias(enc: StructuralEncoding, seq, head_weights) -> np.ndarray:
    """Mixture of encoding components for one sequence and one head."""
    stack = bias_stack(enc, np.asarray(seq, dtype=np.int64))
    w = np.asarray(head_weights, dtype=np.float64)
    if w.shape != (enc.M,):
        raise ValueError(f"head weights must have length {enc.M}, got {w.shape}")
    return np.einsum("m,mij->ij", w, stack)


@dataclass
class BlockParams:
    w_q: ad.Tensor
    w_k: ad.Tensor
    w_v: ad.Tensor
    w_o: ad.Tensor
    ffn_w1: ad.Tensor
    ffn_b1: ad.Tensor
    ffn_w2: ad.Tensor
    ffn_b2: ad.Tensor
    ln1_gain: ad.Tensor
    ln1_shift: ad.Tensor
    ln2_gain: ad.Tensor
    ln2_shift: ad.Tensor


@dataclass
class ModelParams:
    in_proj: ad.Tensor
    blocks: list
    head_mix: list  # one length-M tensor per head, shared across layers
    w_out: ad.Tensor
    b_out: ad.Tensor

    def named_tensors(self) -> list:
        out = [("in_proj", self.in_proj)]
        for i, blk in enumerate(self.blocks):
            for fname in ("w_q", "w_k", "w_v", "w_o", "ffn_w1", "ffn_b1",
                          "ffn_w2", "ffn_b2", "ln1_gain", "ln1_shift",
                          "ln2_gain", "ln2_shift"):
                out.append((f"blocks.{i}.{fname}", getattr(blk, fname)))
        for j, w in enumerate(self.head_mix):
            out.append((f"head_mix.{j}", w))
        out.append(("w_out", self.w_out))
        out.append(("b_out", self.b_out))
        return out

    def tensors(self) -> list:
        return [t for _, t in self.named_tensors()]

    def zero_grads(self) -> None:
        for t in self.tensors():
            t.zero_grad()

    def copy_data(self) -> dict:
        return {name: t.data.copy() for name, t in self.named_tensors()}

    def load_data(self, snapshot: dict) -> None:
        for name, t in self.named_tensors():
            t.data = snapshot[name].copy()


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_model_params(d_in: int, u: int, config: ModelConfig,
                      rng: np.random.Generator) -> ModelParams:
    h = config.hidden
    blocks = []
    for _ in range(config.layers):
        blocks.append(BlockParams(
            w_q=ad.parameter(_glorot(rng, h, h)),
            w_k=ad.parameter(_glorot(rng, h, h)),
            w_v=ad.parameter(_glorot(rng, h, h)),
            w_o=ad.parameter(_glorot(rng, h, h)),
            ffn_w1=ad.parameter(_glorot(rng, h, h)),
            ffn_b1=ad.parameter(np.zeros(h)),
            ffn_w2=ad.parameter(_glorot(rng, h, h)),
            ffn_b2=ad.parameter(np.zeros(h)),
            ln1_gain=ad.parameter(np.ones(h)),
            ln1_shift=ad.parameter(np.zeros(h)),
            ln2_gain=ad.parameter(np.ones(h)),
            ln2_shift=ad.parameter(np.zeros(h)),
        ))
    head_mix = [ad.parameter(np.zeros(config.M)) for _ in range(config.heads)]
    return ModelParams(
        in_proj=ad.parameter(_glorot(rng, d_in, h)),
        blocks=blocks,
        head_mix=head_mix,
        w_out=ad.parameter(_glorot(rng, h, u)),
        b_out=ad.parameter(np.zeros(u)),
    )


def sa_mha(H: ad.Tensor, block: BlockParams, head_mix, stack: np.ndarray,
           heads: int, dropout_p: float = 0.0, training: bool = False,
           rng: np.random.Generator | None = None,
           return_attention: bool = False):
    """Multi-head attention with per-head structural bias on the logits.

    H: (..., s, h); stack: (..., M, s, s) constants gathered per sequence.
    """
    h = H.data.shape[-1]
    if h % heads != 0:
        raise ad.ShapeError(f"sa_mha: heads ({heads}) must divide width ({h})")
    dk = h // heads
    Q = ad.matmul(H, block.w_q)
    K = ad.matmul(H, block.w_k)
    V = ad.matmul(H, block.w_v)
    outs, atts = [], []
    for i in range(heads):
        q = ad.slice_axis(Q, -1, i * dk, (i + 1) * dk)
        k = ad.slice_axis(K, -1, i * dk, (i + 1) * dk)
        v = ad.slice_axis(V, -1, i * dk, (i + 1) * dk)
        logits = ad.scale(ad.matmul(q, ad.transpose_last2(k)), 1.0 / np.sqrt(dk))
        psi = ad.encoding_mix(head_mix[i], stack)
        att = ad.row_softmax(ad.add(logits, psi))
        atts.append(att)
        outs.append(ad.matmul(att, v))
    mixed = ad.matmul(ad.concat(outs, axis=-1), block.w_o)
    if training and dropout_p > 0.0:
        mixed = ad.dropout(mixed, dropout_p, rng, training=True)
    if return_attention:
        return mixed, atts
    return mixed


def transformer_block(H: ad.Tensor, block: BlockParams, head_mix,
                      stack: np.ndarray, heads: int, dropout_p: float = 0.0,
                      training: bool = False,
                      rng: np.random.Generator | None = None) -> ad.Tensor:
    att = sa_mha(H, block, head_mix, stack, heads, dropout_p, training, rng)
    H = ad.layer_norm(ad.add(H, att), block.ln1_gain, block.ln1_shift)
    inner = ad.gelu(ad.add(ad.matmul(H, block.ffn_w1), block.ffn_b1))
    ffn = ad.add(ad.matmul(inner, block.ffn_w2), block.ffn_b2)
    return ad.layer_norm(ad.add(H, ffn), block.ln2_gain, block.ln2_shift)


def forward_batch(seqs: np.ndarray, X_final, params: ModelParams,
                  enc: StructuralEncoding, config: ModelConfig,
                  training: bool = False,
                  rng: np.random.Generator | None = None) -> ad.Tensor:
    """Logits tensor of shape (batch, classes) for a (batch, s) id array."""
    seqs = np.asarray(seqs, dtype=np.int64)
    if seqs.ndim != 2:
        raise ad.ShapeError(f"forward_batch: seqs must be 2-D, got {seqs.shape}")
    xf = X_final if isinstance(X_final, ad.Tensor) else ad.tensor(X_final)
    if seqs.size and (seqs.min() < 0 or seqs.max() >= xf.data.shape[0]):
        raise ValueError(
            f"unknown node id in sequences: ids must lie in "
            f"[0, {xf.data.shape[0]})"
        )
    stack = bias_stack(enc, seqs)
    H = ad.matmul(ad.gather_rows(xf, seqs), params.in_proj)
    for block in params.blocks:
        H = transformer_block(H, block, params.head_mix, stack, config.heads,
                              config.dropout, training, rng)
    target = ad.reshape(ad.slice_axis(H, 1, 0, 1), (seqs.shape[0], config.hidden))
    return ad.add(ad.matmul(target, params.w_out), params.b_out)


def target_embeddings(seqs: np.ndarray, X_final, params: ModelParams,
                      enc: StructuralEncoding, config: ModelConfig) -> np.ndarray:
    """Final-layer target-token representations, eval mode."""
    seqs = np.asarray(seqs, dtype=np.int64)
    xf = X_final if isinstance(X_final, ad.Tensor) else ad.tensor(X_final)
    stack = bias_stack(enc, seqs)
    H = ad.matmul(ad.gather_rows(xf, seqs), params.in_proj)
    for block in params.blocks:
        H = transformer_block(H, block, params.head_mix, stack, config.heads)
    return H.data[:, 0, :].copy()


def forward(seq, X_final, params: ModelParams, enc: StructuralEncoding,
            config: ModelConfig, mode: str = "eval",
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Logits (1, u) for one sequence; softmax is the caller's job."""
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    nodes = seq.nodes if hasattr(seq, "nodes") else tuple(seq)
    out = forward_batch(np.asarray([nodes]), X_final, params, enc, config,
                        training=(mode == "train"), rng=rng)
    return out.data


def softmax(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def ensemble_predict(node: int, sequences, X_final, params: ModelParams,
                     enc: StructuralEncoding, config: ModelConfig):
    """Average softmax over the node's sequences; argmax (lowest index wins)."""
    if not sequences:
        raise ValueError(f"node {node} has no sequences")
    seqs = np.asarray([s.nodes if hasattr(s, "nodes") else tuple(s)
                       for s in sequences], dtype=np.int64)
    logits = forward_batch(seqs, X_final, params, enc, config).data
    probs = softmax(logits).mean(axis=0)
    return int(np.argmax(probs)), probs


def save_checkpoint(path, config: ModelConfig, params: ModelParams,
                    d_in: int, u: int) -> None:
    blob = {
        "version": CHECKPOINT_VERSION,
        "config": config.as_dict(),
        "d_in": d_in,
        "u": u,
        "params": {
            name: {"shape": list(t.data.shape), "data": t.data.ravel().tolist()}
            for name, t in params.named_tensors()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path):
    """Returns (config, params, d_in, u); rejects unknown versions."""
    with open(path, encoding="utf-8") as fh:
        blob = json.load(fh)
    if blob.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {blob.get('version')!r}")
    config = ModelConfig(**blob["config"])
    d_in, u = blob["d_in"], blob["u"]
    params = init_model_params(d_in, u, config, np.random.default_rng(0))
    for name, t in params.named_tensors():
        entry = blob["params"][name]
        t.data = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
    return config, params, d_in, u
