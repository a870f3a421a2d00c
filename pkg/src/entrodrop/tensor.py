"""Dense float64 tensors with tape-based reverse-mode automatic differentiation.

Everything is numpy underneath; the tape records each executed op so that
backward() can replay the recorded closures exactly once in reverse execution
order. Ops run outside an active tape compute forward values only, which is
how evaluation and entropy scoring avoid paying for graph bookkeeping.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes violate an op's contract."""


_TAPE_STACK: list["Tape"] = []


def _active_tape() -> "Tape | None":
    return _TAPE_STACK[-1] if _TAPE_STACK else None


class Tensor:
    """A dense float64 array plus an optional gradient of the same shape."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray, owned: bool = False) -> None:
        """Add g into grad. owned=True hands over a freshly allocated array
        that no other tensor aliases, so the defensive first-copy is skipped."""
        if self.grad is None:
            self.grad = g if owned else np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


class Tape:
    """Ordered record of executed ops for one backward pass.

    Usage:
        with Tape() as tape:
            loss = ...
        tape.backward(loss)
    """

    __slots__ = ("_backward_fns",)

    def __init__(self):
        self._backward_fns: list[Callable[[], None]] = []

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPE_STACK.pop()

    def _record(self, fn: Callable[[], None]) -> None:
        self._backward_fns.append(fn)

    def backward(self, loss: Tensor) -> None:
        """Seed d(loss)/d(loss) = 1 and visit every recorded op once, in reverse."""
        if loss.data.shape != ():
            raise ShapeError(f"backward() needs a scalar loss, got shape {loss.data.shape}")
        loss.grad = np.ones((), dtype=np.float64)
        for fn in reversed(self._backward_fns):
            fn()


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make_output(data: np.ndarray, parents: Sequence[Tensor],
                 backward: Callable[[np.ndarray], None]) -> Tensor:
    """Wrap op output; record backward on the active tape when grads can flow."""
    out = Tensor(data)
    tape = _active_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True

        def fn():
            if out.grad is not None:
                backward(out.grad)

        tape._record(fn)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum gradient over axes that numpy broadcasting expanded."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return _make_output(data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape), owned=True)
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape), owned=True)

    return _make_output(data, (a, b), backward)


def sub(a, b) -> Tensor:
    return add(a, mul(b, -1.0))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; batched over leading dims with numpy matmul semantics."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError(f"matmul needs >=2-d operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul inner dims disagree: {a.data.shape} @ {b.data.shape}")
    if a.data.ndim > 2 and b.data.ndim == 2:
        return _matmul_flat(a, b)
    data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            ga = g @ b.data.swapaxes(-1, -2)
            a._accumulate(_unbroadcast(ga, a.data.shape), owned=True)
        if b.requires_grad:
            gb = a.data.swapaxes(-1, -2) @ g
            b._accumulate(_unbroadcast(gb, b.data.shape), owned=True)

    return _make_output(data, (a, b), backward)


def _matmul_flat(a: Tensor, b: Tensor) -> Tensor:
    """Stacked [..., K] @ weight [K, N], flattened so each pass is one GEMM.

    The generic batched path would run one small GEMM per leading index and
    a reduction for the weight gradient; collapsing the leading axes does the
    same contractions in single large calls.
    """
    kdim, ndim = b.data.shape
    a2 = a.data.reshape(-1, kdim)
    data = (a2 @ b.data).reshape(a.data.shape[:-1] + (ndim,))

    def backward(g):
        g2 = g.reshape(-1, ndim)
        if a.requires_grad:
            a._accumulate((g2 @ b.data.T).reshape(a.data.shape), owned=True)
        if b.requires_grad:
            b._accumulate(a2.T @ g2, owned=True)

    return _make_output(data, (a, b), backward)


def linear(a: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """a @ w + b for stacked inputs [..., K], weight [K, N], bias [N].

    One op instead of matmul-then-add keeps the tape short on the hot path;
    gradients are the flattened GEMMs plus a column-sum for the bias.
    """
    a, w, b = _as_tensor(a), _as_tensor(w), _as_tensor(b)
    if a.data.ndim < 2 or w.data.ndim != 2 or b.data.ndim != 1:
        raise ShapeError(f"linear needs [..., K] @ [K, N] + [N], got "
                         f"{a.data.shape}, {w.data.shape}, {b.data.shape}")
    if a.data.shape[-1] != w.data.shape[0] or w.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"linear dims disagree: {a.data.shape} @ "
                         f"{w.data.shape} + {b.data.shape}")
    kdim, ndim = w.data.shape
    a2 = a.data.reshape(-1, kdim)
    out = a2 @ w.data
    out += b.data
    data = out.reshape(a.data.shape[:-1] + (ndim,))

    def backward(g):
        g2 = g.reshape(-1, ndim)
        if a.requires_grad:
            a._accumulate((g2 @ w.data.T).reshape(a.data.shape), owned=True)
        if w.requires_grad:
            w._accumulate(a2.T @ g2, owned=True)
        if b.requires_grad:
            b._accumulate(g2.sum(axis=0), owned=True)

    return _make_output(data, (a, w, b), backward)


def relu(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    data = np.maximum(x.data, 0.0)

    def backward(g):
        if x.requires_grad:
            x._accumulate(g * (x.data > 0.0), owned=True)

    return _make_output(data, (x,), backward)


def tsum(x: Tensor) -> Tensor:
    """Sum of all elements; the scalar reduction used by gradient checks."""
    x = _as_tensor(x)
    data = np.asarray(x.data.sum(), dtype=np.float64)

    def backward(g):
        if x.requires_grad:
            x._accumulate(np.broadcast_to(g, x.data.shape))

    return _make_output(data, (x,), backward)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    x = _as_tensor(x)
    data = x.data.reshape(shape)

    def backward(g):
        if x.requires_grad:
            x._accumulate(g.reshape(x.data.shape))

    return _make_output(data, (x,), backward)


def transpose(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    x = _as_tensor(x)
    axes = tuple(a % x.data.ndim for a in axes)
    data = x.data.transpose(axes)
    inverse = tuple(np.argsort(axes))

    def backward(g):
        if x.requires_grad:
            x._accumulate(g.transpose(inverse))

    return _make_output(data, (x,), backward)


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis, stabilized by row-max subtraction."""
    x = _as_tensor(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        if x.requires_grad:
            inner = (g * data).sum(axis=-1, keepdims=True)
            x._accumulate(data * (g - inner), owned=True)

    return _make_output(data, (x,), backward)


LAYER_NORM_EPS = 1e-5


def layer_norm(x: Tensor, gain: Tensor | None = None,
               bias: Tensor | None = None) -> Tensor:
    """Normalize the last axis to zero mean, unit variance, then optionally
    apply the elementwise affine y = n * gain + bias (gain, bias of shape [d])."""
    x = _as_tensor(x)
    mu = x.data.mean(axis=-1, keepdims=True)
    var = ((x.data - mu) ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LAYER_NORM_EPS)
    n = (x.data - mu) * inv
    if gain is None:
        y = n
        parents: tuple[Tensor, ...] = (x,)
    else:
        gain, bias = _as_tensor(gain), _as_tensor(bias)
        if gain.data.shape != x.data.shape[-1:] or bias.data.shape != x.data.shape[-1:]:
            raise ShapeError(f"affine terms must have shape {x.data.shape[-1:]}, "
                             f"got {gain.data.shape} and {bias.data.shape}")
        y = n * gain.data + bias.data
        parents = (x, gain, bias)

    def backward(g):
        lead = tuple(range(g.ndim - 1))
        if gain is not None:
            if gain.requires_grad:
                gain._accumulate((g * n).sum(axis=lead), owned=True)
            if bias.requires_grad:
                bias._accumulate(g.sum(axis=lead), owned=True)
        if x.requires_grad:
            gn = g if gain is None else g * gain.data
            gm = gn.mean(axis=-1, keepdims=True)
            gym = (gn * n).mean(axis=-1, keepdims=True)
            x._accumulate(inv * (gn - gm - n * gym), owned=True)

    return _make_output(y, parents, backward)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Gather rows of table [V, d] at integer ids of any shape -> [*ids.shape, d]."""
    table = _as_tensor(table)
    idx = np.asarray(ids, dtype=np.int64)
    if table.data.ndim != 2:
        raise ShapeError(f"embedding table must be 2-d, got {table.data.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise ShapeError("embedding id out of range")
    data = table.data[idx]

    def backward(g):
        if table.requires_grad:
            gt = np.zeros_like(table.data)
            np.add.at(gt, idx.ravel(), g.reshape(-1, table.data.shape[1]))
            table._accumulate(gt, owned=True)

    return _make_output(data, (table,), backward)


# large negative instead of -inf keeps masked logits free of inf arithmetic
_CAUSAL_NEG = -1e30
_causal_masks: dict[int, np.ndarray] = {}


def _causal_mask(t: int) -> np.ndarray:
    m = _causal_masks.get(t)
    if m is None:
        m = np.triu(np.full((t, t), _CAUSAL_NEG), k=1)
        _causal_masks[t] = m
    return m


def attention(q: Tensor, k: Tensor, v: Tensor, causal: bool) -> Tensor:
    """Scaled dot-product attention over the last two axes [..., T, d_head]."""
    q, k, v = _as_tensor(q), _as_tensor(k), _as_tensor(v)
    if q.data.shape != k.data.shape or k.data.shape != v.data.shape:
        raise ShapeError(
            f"attention operands must share a shape, got {q.data.shape}, "
            f"{k.data.shape}, {v.data.shape}")
    t, dh = q.data.shape[-2], q.data.shape[-1]
    scores = mul(matmul(q, transpose(k, tuple(range(k.data.ndim - 2)) + (-1, -2))),
                 1.0 / np.sqrt(dh))
    if causal:
        scores = add(scores, Tensor(_causal_mask(t)))
    return matmul(softmax(scores), v)


def softmax_cross_entropy(logits: Tensor, targets, position_weights) -> Tensor:
    """Weighted mean of -log p(target) over positions; max-subtraction stabilized.

    logits: [..., V]; targets and position_weights match the leading shape.
    Positions with zero weight contribute nothing; all-zero weights give loss 0.
    """
    logits = _as_tensor(logits)
    tgt = np.asarray(targets, dtype=np.int64)
    w = np.asarray(position_weights, dtype=np.float64)
    vsize = logits.data.shape[-1]
    if tgt.shape != logits.data.shape[:-1]:
        raise ShapeError(f"targets shape {tgt.shape} != logits leading {logits.data.shape[:-1]}")
    if w.shape != tgt.shape:
        raise ShapeError(f"weights shape {w.shape} != targets shape {tgt.shape}")
    if np.any(w < 0):
        raise ShapeError("position weights must be nonnegative")
    if tgt.size and (tgt.min() < 0 or tgt.max() >= vsize):
        raise ShapeError("target index out of vocabulary range")

    shifted = logits.data - logits.data.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - logz
    picked = np.take_along_axis(logp, tgt[..., None], axis=-1)[..., 0]
    wsum = w.sum()
    if wsum == 0.0:
        data = np.asarray(0.0)
    else:
        data = np.asarray(-(w * picked).sum() / wsum)

    def backward(g):
        if logits.requires_grad and wsum != 0.0:
            probs = np.exp(logp)
            d = probs * (w / wsum)[..., None]
            np.subtract.at(d, (*np.indices(tgt.shape), tgt), w / wsum)
            logits._accumulate(g * d, owned=True)

    return _make_output(data, (logits,), backward)
