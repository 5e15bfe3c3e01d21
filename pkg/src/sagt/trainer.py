"""Two-stage supervised training: amplification network first, then the
structure-aware transformer over sampled sequences."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .enrichment import GcnParams, compat_norm_csr, gcn_amplify
from .graph import CompatibilityMatrix, Graph
from .model import (ModelConfig, ModelParams, StructuralEncoding, forward_batch,
                    init_model_params, softmax)
from .optim import OptimizerState, adam_step, adamw_step, lr_schedule

# Philox stream ids: every consumer of randomness is keyed on (seed, id)
_STREAM_GCN_INIT = 1
_STREAM_GCN_DROPOUT = 2
_STREAM_TF_INIT = 3
_STREAM_TF_SHUFFLE = 4
_STREAM_TF_DROPOUT = 5

EVAL_CHUNK = 256


class DivergenceError(RuntimeError):
    """Training loss became non-finite."""


@dataclass(frozen=True)
class SplitMasks:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        parts = [np.asarray(p, dtype=np.int64) for p in (self.train, self.val, self.test)]
        allidx = np.concatenate(parts)
        if len(set(allidx.tolist())) != allidx.size:
            raise ValueError("split masks overlap")
        for name, p in zip(("train", "val", "test"), parts):
            object.__setattr__(self, name, np.sort(p))


@dataclass(frozen=True)
class GcnTrainConfig:
    lr: float = 0.01
    weight_decay: float = 5e-4
    hidden: int = 128
    dropout: float = 0.3
    epochs: int = 200


@dataclass(frozen=True)
class TransformerTrainConfig:
    lr_start: float = 2e-4
    lr_end: float = 1e-9
    weight_decay: float = 0.01
    batch: int = 32
    epochs: int = 300


@dataclass(frozen=True)
class TrainConfig:
    gcn: GcnTrainConfig = field(default_factory=GcnTrainConfig)
    transformer: TransformerTrainConfig = field(default_factory=TransformerTrainConfig)
    seed: int = 0
    patience: int = 50

    def __post_init__(self):
        if self.gcn.lr <= 0 or self.transformer.lr_start <= 0 or self.transformer.lr_end <= 0:
            raise ValueError("learning rates must be positive")
        if self.transformer.batch < 1:
            raise ValueError("batch size must be >= 1")


def _stream(seed: int, stream_id: int) -> np.random.Generator:
    key = np.array([seed, stream_id], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def make_splits(g: Graph, fractions=(0.6, 0.2, 0.2), seed: int = 0) -> SplitMasks:
    """Stratified train/val/test split; sizes floor(f*n) with test = rest."""
    if abs(sum(fractions) - 1.0) > 1e-9 or len(fractions) != 3:
        raise ValueError(f"fractions must be three values summing to 1, got {fractions}")
    n = g.n
    n_train = int(np.floor(fractions[0] * n))
    n_val = int(np.floor(fractions[1] * n))
    rng = _stream(seed, 0)
    perm = rng.permutation(n)

    counts = np.bincount(g.y, minlength=g.u)
    if counts.min() < 3:
        warnings.warn(
            f"class {int(counts.argmin())} has fewer than 3 nodes; "
            "falling back to an unstratified split"
        )
        return SplitMasks(train=perm[:n_train], val=perm[n_train:n_train + n_val],
                          test=perm[n_train + n_val:])

    by_class = [perm[g.y[perm] == k] for k in range(g.u)]
    train_k = _apportion(fractions[0], counts, n_train)
    spare = counts - train_k
    val_k = _apportion(fractions[1], counts, n_val, cap=spare)
    train, val, test = [], [], []
    for k in range(g.u):
        members = by_class[k]
        t, v = train_k[k], val_k[k]
        train.append(members[:t])
        val.append(members[t:t + v])
        test.append(members[t + v:])
    return SplitMasks(train=np.concatenate(train), val=np.concatenate(val),
                      test=np.concatenate(test))


def _apportion(frac: float, counts: np.ndarray, total: int,
               cap: np.ndarray | None = None) -> np.ndarray:
    """Largest-remainder allocation of `total` across classes."""
    if cap is None:
        cap = counts
    ideal = frac * counts
    base = np.minimum(np.floor(ideal).astype(np.int64), cap)
    deficit = total - int(base.sum())
    remainders = ideal - np.floor(ideal)
    # favor large remainders, then lower class index; only where room remains
    order = np.lexsort((np.arange(counts.size), -remainders))
    out = base.copy()
    i = 0
    while deficit > 0:
        k = order[i % counts.size]
        if out[k] < cap[k]:
            out[k] += 1
            deficit -= 1
        i += 1
        if i > 10 * counts.size and deficit > 0:
            raise ValueError("cannot apportion split sizes within class caps")
    return out


def cross_entropy(logits, label) -> ad.Tensor:
    """Mean negative log-likelihood; accepts a single label or a batch."""
    t = logits if isinstance(logits, ad.Tensor) else ad.tensor(logits)
    if t.data.ndim == 1:
        t = ad.reshape(t, (1, t.data.shape[0]))
    labels = np.atleast_1d(np.asarray(label, dtype=np.int64))
    u = t.data.shape[1]
    if labels.min() < 0 or labels.max() >= u:
        raise ValueError(f"label out of range [0, {u})")
    return ad.cross_entropy(t, labels)


@dataclass
class GcnStageResult:
    params: GcnParams
    P: np.ndarray
    head_w: np.ndarray
    head_b: np.ndarray
    history: list


def train_gcn_stage(g: Graph, comp: CompatibilityMatrix, masks: SplitMasks,
                    cfg: TrainConfig) -> GcnStageResult:
    """Train the 2-layer amplification network with an auxiliary head.

    Returns frozen layer weights plus the amplified matrix P recomputed in
    eval mode (no dropout).
    """
    init_rng = _stream(cfg.seed, _STREAM_GCN_INIT)
    drop_rng = _stream(cfg.seed, _STREAM_GCN_DROPOUT)
    d, u, hidden = g.d, g.u, cfg.gcn.hidden

    def glorot(fan_in, fan_out):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        return init_rng.uniform(-lim, lim, size=(fan_in, fan_out))

    w1 = ad.parameter(glorot(d, hidden))
    w2 = ad.parameter(glorot(hidden, d))
    head_w = ad.parameter(glorot(d, u))
    head_b = ad.parameter(np.zeros(u))
    params = [w1, w2, head_w, head_b]

    C_hat = compat_norm_csr(comp)
    X = ad.tensor(g.X)
    y_train = g.y[masks.train]
    opt = OptimizerState(lr=cfg.gcn.lr, weight_decay=cfg.gcn.weight_decay)
    history = []

    for epoch in range(1, cfg.gcn.epochs + 1):
        h1 = ad.sigmoid(ad.matmul(ad.aggregate(C_hat, X), w1))
        h1 = ad.dropout(h1, cfg.gcn.dropout, drop_rng, training=True)
        p_mat = ad.sigmoid(ad.matmul(ad.aggregate(C_hat, h1), w2))
        logits = ad.add(ad.matmul(ad.gather_rows(p_mat, masks.train), head_w), head_b)
        loss = ad.cross_entropy(logits, y_train)
        if not np.isfinite(loss.data):
            raise DivergenceError(f"amplification loss not finite at epoch {epoch}")
        for p in params:
            p.zero_grad()
        ad.backward(loss)
        adam_step(opt, params, [p.grad for p in params])
        acc = float((logits.data.argmax(axis=1) == y_train).mean())
        history.append({"epoch": epoch, "loss": float(loss.data), "train_acc": acc})

    frozen = GcnParams(weights=(w1.data.copy(), w2.data.copy()))
    P = gcn_amplify(g, comp, frozen)
    return GcnStageResult(params=frozen, P=P, head_w=head_w.data.copy(),
                          head_b=head_b.data.copy(), history=history)


@dataclass
class TransformerStageResult:
    params: ModelParams
    best_epoch: int
    best_val_acc: float
    epochs_run: int
    history: list


def train_transformer_stage(g: Graph, enc: StructuralEncoding, sequences,
                            X_final: np.ndarray, masks: SplitMasks,
                            model_cfg: ModelConfig,
                            cfg: TrainConfig) -> TransformerStageResult:
    """Mini-batch training over per-train-node sequences with a linear LR
    ramp, early stopping on validation ensemble accuracy, best-val weights
    restored on return."""
    if len(sequences) != g.n or any(not s for s in sequences):
        raise ValueError("sequences must cover every node")
    tcfg = cfg.transformer
    init_rng = _stream(cfg.seed, _STREAM_TF_INIT)
    shuffle_rng = _stream(cfg.seed, _STREAM_TF_SHUFFLE)
    drop_rng = _stream(cfg.seed, _STREAM_TF_DROPOUT)

    params = init_model_params(X_final.shape[1], g.u, model_cfg, init_rng)
    tensors = params.tensors()

    seq_nodes = np.asarray(
        [s.nodes for v in masks.train for s in sequences[v]], dtype=np.int64
    )
    seq_labels = np.asarray(
        [g.y[v] for v in masks.train for _ in sequences[v]], dtype=np.int64
    )
    t_total = seq_nodes.shape[0]
    steps_per_epoch = int(np.ceil(t_total / tcfg.batch))
    total_steps = max(tcfg.epochs * steps_per_epoch, 1)

    opt = OptimizerState(lr=tcfg.lr_start, weight_decay=tcfg.weight_decay)
    xf = ad.tensor(X_final)
    history = []
    best_val, best_epoch, best_snapshot = -1.0, 0, params.copy_data()
    epochs_since_best = 0
    step_idx = 0
    epochs_run = 0

    for epoch in range(1, tcfg.epochs + 1):
        epochs_run = epoch
        perm = shuffle_rng.permutation(t_total)
        loss_sum, correct = 0.0, 0
        for start in range(0, t_total, tcfg.batch):
            idx = perm[start:start + tcfg.batch]
            opt.lr = lr_schedule(step_idx, total_steps, tcfg.lr_start, tcfg.lr_end)
            logits = forward_batch(seq_nodes[idx], xf, params, enc, model_cfg,
                                   training=True, rng=drop_rng)
            loss = ad.cross_entropy(logits, seq_labels[idx])
            if not np.isfinite(loss.data):
                raise DivergenceError(
                    f"transformer loss not finite at epoch {epoch}; "
                    f"last finite loss {history[-1]['train_loss'] if history else 'n/a'}"
                )
            params.zero_grads()
            ad.backward(loss)
            grads = [t.grad if t.grad is not None else np.zeros_like(t.data)
                     for t in tensors]
            adamw_step(opt, tensors, grads)
            step_idx += 1
            loss_sum += float(loss.data) * idx.size
            correct += int((logits.data.argmax(axis=1) == seq_labels[idx]).sum())
        val_acc = evaluate(params, enc, sequences, X_final, masks.val, model_cfg, g.y)
        history.append({
            "epoch": epoch,
            "train_loss": loss_sum / t_total,
            "train_acc": correct / t_total,
            "val_acc": val_acc,
        })
        if val_acc > best_val:
            best_val, best_epoch = val_acc, epoch
            best_snapshot = params.copy_data()
            epochs_since_best = 0
        else:
            epochs_since_best += 1
        if epochs_since_best >= cfg.patience:
            break

    params.load_data(best_snapshot)
    return TransformerStageResult(params=params, best_epoch=best_epoch,
                                  best_val_acc=best_val, epochs_run=epochs_run,
                                  history=history)


def evaluate(params: ModelParams, enc: StructuralEncoding, sequences,
             X_final: np.ndarray, split_nodes, config: ModelConfig,
             labels: np.ndarray) -> float:
    """Ensemble accuracy over a node split, eval mode only."""
    split_nodes = np.asarray(split_nodes, dtype=np.int64)
    if split_nodes.size == 0:
        return 0.0
    q = len(sequences[split_nodes[0]])
    seqs = np.asarray([s.nodes for v in split_nodes for s in sequences[v]],
                      dtype=np.int64)
    chunks = []
    for start in range(0, seqs.shape[0], EVAL_CHUNK):
        logits = forward_batch(seqs[start:start + EVAL_CHUNK], X_final, params,
                               enc, config).data
        chunks.append(softmax(logits))
    probs = np.vstack(chunks).reshape(split_nodes.size, q, -1).mean(axis=1)
    preds = probs.argmax(axis=1)
    return float((preds == labels[split_nodes]).mean())
