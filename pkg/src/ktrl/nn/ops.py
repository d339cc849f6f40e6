"""Primitive differentiable operations.

Every op returns a new :class:`Tensor` whose backward closure accumulates
exact analytic gradients into its parents. Non-Tensor operands are lifted to
constants and receive no gradient.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, as_tensor


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# arithmetic


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return Tensor.from_op(out_data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data - b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.data.shape))

    return Tensor.from_op(out_data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return Tensor.from_op(out_data, (a, b), backward)


def neg(a) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        if a.requires_grad:
            a._accumulate(-g)

    return Tensor.from_op(-a.data, (a,), backward)


def matmul(a, b) -> Tensor:
    """Matrix product. Supports (..., M, K) @ (K, N) and equal-batch stacked
    (..., M, K) @ (..., K, N)."""
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    if bd.ndim == 2:
        lead = ad.shape[:-1]
        a2 = ad.reshape(-1, ad.shape[-1])
        out_data = (a2 @ bd).reshape(*lead, bd.shape[1])

        def backward(g):
            g2 = g.reshape(-1, bd.shape[1])
            if a.requires_grad:
                a._accumulate((g2 @ bd.T).reshape(ad.shape))
            if b.requires_grad:
                b._accumulate(a2.T @ g2)

    else:
        if ad.shape[:-2] != bd.shape[:-2]:
            raise ValueError(f"matmul batch dims differ: {ad.shape} vs {bd.shape}")
        out_data = ad @ bd

        def backward(g):
            if a.requires_grad:
                a._accumulate(g @ bd.swapaxes(-1, -2))
            if b.requires_grad:
                b._accumulate(ad.swapaxes(-1, -2) @ g)

    return Tensor.from_op(out_data, (a, b), backward)


# ---------------------------------------------------------------------------
# reductions and shape


def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if not a.requires_grad:
            return
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.data.shape))
        else:
            if not keepdims:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.data.shape))

    return Tensor.from_op(out_data, (a,), backward)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.mean(axis=axis, keepdims=keepdims)
    denom = a.data.size if axis is None else np.prod(
        [a.data.shape[i] for i in (axis if isinstance(axis, tuple) else (axis,))]
    )

    def backward(g):
        if not a.requires_grad:
            return
        gg = g / denom
        if axis is None:
            a._accumulate(np.broadcast_to(gg, a.data.shape))
        else:
            if not keepdims:
                gg = np.expand_dims(gg, axis)
            a._accumulate(np.broadcast_to(gg, a.data.shape))

    return Tensor.from_op(out_data, (a,), backward)


def amax(a, axis: int) -> Tensor:
    """Max along one axis. Gradient flows to the first max element (ties)."""
    a = as_tensor(a)
    idx = np.argmax(a.data, axis=axis)
    out_data = np.take_along_axis(a.data, np.expand_dims(idx, axis), axis=axis).squeeze(axis)

    def backward(g):
        if not a.requires_grad:
            return
        ga = np.zeros_like(a.data)
        np.put_along_axis(ga, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis=axis)
        a._accumulate(ga)

    return Tensor.from_op(out_data, (a,), backward)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.reshape(shape)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.reshape(a.data.shape))

    return Tensor.from_op(out_data, (a,), backward)


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.transpose(axes)
    inv = np.argsort(axes)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.transpose(inv))

    return Tensor.from_op(out_data, (a,), backward)


def concat(parts, axis: int = -1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                p._accumulate(g[tuple(sl)])

    return Tensor.from_op(out_data, tuple(parts), backward)


def take_time(a, t: int) -> Tensor:
    """Select one index along axis -2 of (..., L, W): returns (..., W)."""
    a = as_tensor(a)
    out_data = a.data[..., t, :]

    def backward(g):
        if not a.requires_grad:
            return
        ga = np.zeros_like(a.data)
        ga[..., t, :] = g
        a._accumulate(ga)

    return Tensor.from_op(out_data, (a,), backward)


def slice_time(a, start: int, stop: int) -> Tensor:
    """Slice [start:stop] along axis -2 of (..., L, W)."""
    a = as_tensor(a)
    out_data = a.data[..., start:stop, :]

    def backward(g):
        if not a.requires_grad:
            return
        ga = np.zeros_like(a.data)
        ga[..., start:stop, :] = g
        a._accumulate(ga)

    return Tensor.from_op(out_data, (a,), backward)


# ---------------------------------------------------------------------------
# elementwise nonlinearities


def exp(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.exp(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * out_data)

    return Tensor.from_op(out_data, (a,), backward)


def log(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.log(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g / a.data)

    return Tensor.from_op(out_data, (a,), backward)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.tanh(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * (1.0 - out_data * out_data))

    return Tensor.from_op(out_data, (a,), backward)


def relu(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.maximum(a.data, 0.0)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * (a.data > 0))

    return Tensor.from_op(out_data, (a,), backward)


_GELU_C = np.sqrt(2.0 / np.pi)
_GELU_A = 0.044715


def gelu(a) -> Tensor:
    """tanh-approximation GELU."""
    a = as_tensor(a)
    x = a.data
    u = _GELU_C * (x + _GELU_A * (x * x * x))
    t = np.tanh(u)
    out_data = 0.5 * x * (1.0 + t)

    def backward(g):
        if a.requires_grad:
            du = _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)
            a._accumulate(g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du))

    return Tensor.from_op(out_data, (a,), backward)


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(a) -> Tensor:
    a = as_tensor(a)
    out_data = _softplus(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * _sigmoid(a.data))

    return Tensor.from_op(out_data, (a,), backward)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out_data = _sigmoid(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * out_data * (1.0 - out_data))

    return Tensor.from_op(out_data, (a,), backward)


def clip(a, lo: float, hi: float) -> Tensor:
    """Hard clip; gradient passes only where unclipped."""
    a = as_tensor(a)
    out_data = np.clip(a.data, lo, hi)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * ((a.data >= lo) & (a.data <= hi)))

    return Tensor.from_op(out_data, (a,), backward)


def minimum(a, b) -> Tensor:
    """Elementwise min; on ties the gradient goes to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.data <= b.data
    out_data = np.where(take_a, a.data, b.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * take_a, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * ~take_a, b.data.shape))

    return Tensor.from_op(out_data, (a, b), backward)


# ---------------------------------------------------------------------------
# fused layers


def softmax_last(a, additive_mask: np.ndarray | None = None) -> Tensor:
    """Softmax over the last axis, optionally after adding a constant mask
    (e.g. -inf above the diagonal for causal attention)."""
    a = as_tensor(a)
    z = a.data if additive_mask is None else a.data + additive_mask
    m = z.max(axis=-1, keepdims=True)
    e = np.exp(z - m)
    s = e.sum(axis=-1, keepdims=True)
    out_data = e / s

    def backward(g):
        if a.requires_grad:
            dot = (g * out_data).sum(axis=-1, keepdims=True)
            a._accumulate(out_data * (g - dot))

    return Tensor.from_op(out_data, (a,), backward)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale+shift."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    n = x.data.shape[-1]
    if n < 2:
        raise ValueError(f"layer_norm needs last-axis extent >= 2, got {n}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out_data = xhat * gain.data + bias.data

    def backward(g):
        if gain.requires_grad:
            gain._accumulate(_unbroadcast(g * xhat, gain.data.shape))
        if bias.requires_grad:
            bias._accumulate(_unbroadcast(g, bias.data.shape))
        if x.requires_grad:
            dxhat = g * gain.data
            m1 = dxhat.mean(axis=-1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
            x._accumulate(inv * (dxhat - m1 - xhat * m2))

    return Tensor.from_op(out_data, (x, gain, bias), backward)


def mse_loss(pred, target) -> Tensor:
    """Mean over all elements of squared difference."""
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.data.shape != target.data.shape:
        raise ValueError(f"mse_loss shape mismatch: {pred.data.shape} vs {target.data.shape}")
    diff = pred.data - target.data
    n = diff.size
    out_data = np.asarray((diff * diff).mean(), dtype=pred.data.dtype)

    def backward(g):
        if pred.requires_grad:
            pred._accumulate(g * 2.0 * diff / n)
        if target.requires_grad:
            target._accumulate(g * (-2.0) * diff / n)

    return Tensor.from_op(out_data, (pred, target), backward)


def masked_mse_loss(pred, target, mask: np.ndarray) -> Tensor:
    """MSE averaged over elements where ``mask`` (broadcastable, 0/1) is set."""
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.data.shape != target.data.shape:
        raise ValueError(f"masked_mse_loss shape mismatch: {pred.data.shape} vs {target.data.shape}")
    diff = (pred.data - target.data) * mask
    n = float(np.broadcast_to(mask, pred.data.shape).sum())
    if n == 0:
        raise ValueError("masked_mse_loss: empty mask")
    out_data = np.asarray((diff * diff).sum() / n, dtype=pred.data.dtype)

    def backward(g):
        if pred.requires_grad:
            pred._accumulate(g * 2.0 * diff / n)
        if target.requires_grad:
            target._accumulate(g * (-2.0) * diff / n)

    return Tensor.from_op(out_data, (pred, target), backward)


def bce_with_logits(logits, targets) -> Tensor:
    """Mean binary cross-entropy on raw logits (numerically stable)."""
    logits, targets = as_tensor(logits), as_tensor(targets)
    x, y = logits.data, targets.data
    if x.shape != y.shape:
        raise ValueError(f"bce_with_logits shape mismatch: {x.shape} vs {y.shape}")
    out_data = np.asarray((y * _softplus(-x) + (1.0 - y) * _softplus(x)).mean(), dtype=x.dtype)
    n = x.size

    def backward(g):
        if logits.requires_grad:
            logits._accumulate(g * (_sigmoid(x) - y) / n)

    return Tensor.from_op(out_data, (logits, targets), backward)
