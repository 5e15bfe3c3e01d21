"""Dense reverse-mode differentiation over float64 numpy arrays.

Each op builds a node holding its inputs and a closure that maps the
output gradient to input gradients.  ``backward`` walks the graph in
reverse topological order.  Gradients are retained (and accumulated
across calls) only on leaf tensors that require grad; intermediate
buffers are fresh per call.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf, expit

LAYER_NORM_EPS = 1e-5

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class ShapeError(ValueError):
    """Operands do not fit the op; message names the op and shapes."""


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def is_leaf(self):
        return not self._parents

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def tensor(data, requires_grad=False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def _node(data, parents, backward_fn) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Reduce a broadcasted gradient back to the operand's shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim < 2 or b.data.ndim < 2 or a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.data.shape} x {b.data.shape}")
    need_a, need_b = a.requires_grad, b.requires_grad
    if a.data.ndim > 2 and b.data.ndim == 2:
        # stacked rows against one matrix: run a single flat GEMM
        k = a.data.shape[-1]
        flat = a.data.reshape(-1, k)
        out = (flat @ b.data).reshape(a.data.shape[:-1] + (b.data.shape[1],))

        def backward_fn(g):
            gf = g.reshape(-1, b.data.shape[1])
            ga = (gf @ b.data.T).reshape(a.data.shape) if need_a else None
            gb = flat.T @ gf if need_b else None
            return ga, gb

        return _node(out, (a, b), backward_fn)

    out = np.matmul(a.data, b.data)

    def backward_fn(g):
        ga = gb = None
        if need_a:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)),
                              a.data.shape)
        if need_b:
            gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g),
                              b.data.shape)
        return ga, gb

    return _node(out, (a, b), backward_fn)


def transpose_last2(a: Tensor) -> Tensor:
    if a.data.ndim < 2:
        raise ShapeError(f"transpose_last2: need >= 2 dims, got {a.data.shape}")
    out = np.swapaxes(a.data, -1, -2)

    def backward_fn(g):
        return (np.swapaxes(g, -1, -2),)

    return _node(out, (a,), backward_fn)


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise ShapeError(f"add: cannot broadcast {a.data.shape} + {b.data.shape}")
    out = a.data + b.data

    def backward_fn(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _node(out, (a, b), backward_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise ShapeError(f"mul: cannot broadcast {a.data.shape} * {b.data.shape}")
    out = a.data * b.data

    def backward_fn(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return _node(out, (a, b), backward_fn)


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    out = a.data * s

    def backward_fn(g):
        return (g * s,)

    return _node(out, (a,), backward_fn)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat: need at least one tensor")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward_fn(g):
        return tuple(np.split(g, splits, axis=axis))

    return _node(out, tuple(tensors), backward_fn)


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    out = a.data[idx]

    def backward_fn(g):
        ga = np.zeros_like(a.data)
        ga[idx] = g
        return (ga,)

    return _node(out, (a,), backward_fn)


def reshape(a: Tensor, shape) -> Tensor:
    out = a.data.reshape(shape)

    def backward_fn(g):
        return (g.reshape(a.data.shape),)

    return _node(out, (a,), backward_fn)


def row_softmax(a: Tensor) -> Tensor:
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward_fn(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        return ((g - dot) * out,)

    return _node(out, (a,), backward_fn)


def gelu(a: Tensor) -> Tensor:
    x = a.data
    phi = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    out = x * phi

    def backward_fn(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
        return (g * (phi + x * pdf),)

    return _node(out, (a,), backward_fn)


def sigmoid(a: Tensor) -> Tensor:
    out = expit(a.data)

    def backward_fn(g):
        return (g * out * (1.0 - out),)

    return _node(out, (a,), backward_fn)


def layer_norm(a: Tensor, gain: Tensor, shift: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    h = a.data.shape[-1]
    if gain.data.shape != (h,) or shift.data.shape != (h,):
        raise ShapeError(
            f"layer_norm: gain/shift must be ({h},), got "
            f"{gain.data.shape} and {shift.data.shape}"
        )
    mu = a.data.mean(axis=-1, keepdims=True)
    var = a.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (a.data - mu) * inv
    out = gain.data * xhat + shift.data

    def backward_fn(g):
        gh = g * gain.data
        gx = inv * (
            gh
            - gh.mean(axis=-1, keepdims=True)
            - xhat * (gh * xhat).mean(axis=-1, keepdims=True)
        )
        reduce_axes = tuple(range(g.ndim - 1))
        ggain = (g * xhat).sum(axis=reduce_axes)
        gshift = g.sum(axis=reduce_axes)
        return gx, ggain, gshift

    return _node(out, (a, gain, shift), backward_fn)


def dropout(a: Tensor, p: float, rng: np.random.Generator, training: bool) -> Tensor:
    """Inverted dropout; exact identity in eval mode."""
    if not 0.0 <= p < 1.0:
        raise ShapeError(f"dropout: p must be in [0, 1), got {p}")
    if not training or p == 0.0:
        def backward_fn(g):
            return (g,)

        return _node(a.data, (a,), backward_fn)
    keep = rng.random(a.data.shape) >= p
    factor = keep / (1.0 - p)
    out = a.data * factor

    def backward_fn(g):
        return (g * factor,)

    return _node(out, (a,), backward_fn)


def gather_rows(a: Tensor, indices) -> Tensor:
    indices = np.asarray(indices, dtype=np.int64)
    if a.data.ndim < 1:
        raise ShapeError(f"gather_rows: need >= 1 dim, got {a.data.shape}")
    if indices.size and (indices.min() < 0 or indices.max() >= a.data.shape[0]):
        raise ShapeError(
            f"gather_rows: index out of range [0, {a.data.shape[0]})"
        )
    out = a.data[indices]
    need_a = a.requires_grad

    def backward_fn(g):
        if not need_a:
            return (None,)
        ga = np.zeros_like(a.data)
        np.add.at(ga, indices, g)
        return (ga,)

    return _node(out, (a,), backward_fn)


def encoding_mix(w: Tensor, stack: np.ndarray) -> Tensor:
    """Linear combination of constant matrices: out = sum_m w[m] * stack[..., m, :, :]."""
    stack = np.asarray(stack, dtype=np.float64)
    m = w.data.shape[0] if w.data.ndim == 1 else -1
    if w.data.ndim != 1 or stack.ndim < 3 or stack.shape[-3] != m:
        raise ShapeError(
            f"encoding_mix: weights {w.data.shape} vs stack {stack.shape}"
        )
    out = np.einsum("m,...mij->...ij", w.data, stack)

    def backward_fn(g):
        s1, s2 = stack.shape[-2:]
        gf = g.reshape(-1, s1, s2)
        sf = stack.reshape(-1, stack.shape[-3], s1, s2)
        return (np.einsum("bij,bmij->m", gf, sf),)

    return _node(out, (w,), backward_fn)


def aggregate(M, a: Tensor) -> Tensor:
    """Left-multiply by an untracked (dense or scipy-sparse) matrix."""
    if M.shape[1] != a.data.shape[0]:
        raise ShapeError(f"aggregate: incompatible shapes {M.shape} x {a.data.shape}")
    out = M @ a.data
    Mt = M.T
    need_a = a.requires_grad

    def backward_fn(g):
        return (Mt @ g,) if need_a else (None,)

    return _node(np.asarray(out), (a,), backward_fn)


def sum_all(a: Tensor) -> Tensor:
    out = a.data.sum()

    def backward_fn(g):
        return (np.full_like(a.data, g),)

    return _node(out, (a,), backward_fn)


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log softmax probability of the true labels.

    logits: (batch, classes); labels: (batch,) ints.  Stabilized by
    max-subtraction.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if logits.data.ndim != 2 or labels.shape != (logits.data.shape[0],):
        raise ShapeError(
            f"cross_entropy: logits {logits.data.shape} vs labels {labels.shape}"
        )
    b = logits.data.shape[0]
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    losses = lse - z[np.arange(b), labels]
    out = losses.mean()

    def backward_fn(g):
        probs = np.exp(z - lse[:, None])
        probs[np.arange(b), labels] -= 1.0
        return (g * probs / b,)

    return _node(out, (logits,), backward_fn)


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into .grad of tracked leaf tensors."""
    if loss.data.shape != ():
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.data.shape}")
    topo = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    buffers = {id(loss): np.ones((), dtype=np.float64)}
    for node in reversed(topo):
        g = buffers.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf():
            if node.requires_grad:
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad += g
            continue
        grads = node._backward(g)
        for p, pg in zip(node._parents, grads):
            if not p.requires_grad or pg is None:
                continue
            buf = buffers.get(id(p))
            # out-of-place: closures may hand back views of (or aliases to) g
            buffers[id(p)] = pg if buf is None else buf + pg
