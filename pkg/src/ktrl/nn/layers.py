"""Network building blocks on top of the autodiff primitives."""

from __future__ import annotations

import numpy as np

from . import ops
from .tensor import Tensor


class Module:
    """Base class: parameter discovery by attribute walk, names joined by '/'."""

    def parameters(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for attr, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                out[attr] = value
            elif isinstance(value, Module):
                for k, v in value.parameters().items():
                    out[f"{attr}/{k}"] = v
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        for k, v in item.parameters().items():
                            out[f"{attr}.{i}/{k}"] = v
        return out

    def zero_grad(self):
        for p in self.parameters().values():
            p.grad = None

    def load_state(self, state: dict[str, np.ndarray], prefix: str = ""):
        """Copy arrays into parameters by name; shapes must match."""
        for name, p in self.parameters().items():
            key = prefix + name
            if key not in state:
                raise KeyError(f"missing parameter {key!r} in state")
            arr = np.asarray(state[key])
            if arr.shape != p.data.shape:
                raise ValueError(f"shape mismatch for {key!r}: {arr.shape} vs {p.data.shape}")
            p.data = arr.astype(p.data.dtype)

    def state(self, prefix: str = "") -> dict[str, np.ndarray]:
        return {prefix + name: p.data.copy() for name, p in self.parameters().items()}


def _uniform_init(rng: np.random.Generator, shape, fan_in: int, scale: float, dtype) -> np.ndarray:
    bound = scale / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Affine(Module):
    """y = x @ W + b with fan-in scaled uniform init."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator,
                 scale: float = 1.0, dtype=np.float64):
        self.n_in, self.n_out = n_in, n_out
        self.w = Tensor(_uniform_init(rng, (n_in, n_out), n_in, scale, dtype), requires_grad=True)
        self.b = Tensor(_uniform_init(rng, (n_out,), n_in, scale, dtype), requires_grad=True)

    def __call__(self, x) -> Tensor:
        xd = x.data if isinstance(x, Tensor) else np.asarray(x)
        if xd.shape[-1] != self.n_in:
            raise ValueError(
                f"affine expects last extent {self.n_in}, got input shape {xd.shape}"
            )
        return ops.add(ops.matmul(x, self.w), self.b)


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5, dtype=np.float64):
        self.gain = Tensor(np.ones(dim, dtype=dtype), requires_grad=True)
        self.bias = Tensor(np.zeros(dim, dtype=dtype), requires_grad=True)
        self.eps = eps

    def __call__(self, x) -> Tensor:
        return ops.layer_norm(x, self.gain, self.bias, self.eps)


class CausalSelfAttention(Module):
    """Multi-head self-attention with a strict causal mask.

    Output at position t depends only on positions <= t. Sequences longer than
    the configured context are rejected.
    """

    def __init__(self, width: int, heads: int, context: int,
                 rng: np.random.Generator, dtype=np.float64):
        if width % heads != 0:
            raise ValueError(f"width {width} not divisible by heads {heads}")
        self.width, self.heads, self.context = width, heads, context
        self.head_dim = width // heads
        self.wq = Affine(width, width, rng, dtype=dtype)
        self.wk = Affine(width, width, rng, dtype=dtype)
        self.wv = Affine(width, width, rng, dtype=dtype)
        self.wo = Affine(width, width, rng, scale=0.1, dtype=dtype)
        self._masks: dict = {}

    def _mask(self, length: int, dtype) -> np.ndarray:
        key = (length, np.dtype(dtype).name)
        if key not in self._masks:
            m = np.zeros((length, length), dtype=dtype)
            m[np.triu_indices(length, k=1)] = -np.inf
            self._masks[key] = m
        return self._masks[key]

    def __call__(self, x) -> Tensor:
        squeeze = False
        if isinstance(x, Tensor) and x.ndim == 2:
            x = ops.reshape(x, (1, *x.shape))
            squeeze = True
        b, length, width = x.shape
        if length > self.context:
            raise ValueError(f"sequence length {length} exceeds context {self.context}")
        h, dh = self.heads, self.head_dim
        q = ops.transpose(ops.reshape(self.wq(x), (b, length, h, dh)), (0, 2, 1, 3))
        k = ops.transpose(ops.reshape(self.wk(x), (b, length, h, dh)), (0, 2, 1, 3))
        v = ops.transpose(ops.reshape(self.wv(x), (b, length, h, dh)), (0, 2, 1, 3))
        scores = ops.mul(ops.matmul(q, ops.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(dh))
        probs = ops.softmax_last(scores, self._mask(length, x.dtype))
        ctx = ops.matmul(probs, v)
        ctx = ops.reshape(ops.transpose(ctx, (0, 2, 1, 3)), (b, length, width))
        out = self.wo(ctx)
        if squeeze:
            out = ops.reshape(out, (length, width))
        return out


class TransformerBlock(Module):
    """Pre-norm block: x + attn(ln(x)), then x + mlp(ln(x)) with GELU."""

    def __init__(self, width: int, heads: int, context: int,
                 rng: np.random.Generator, mlp_ratio: int = 4, dtype=np.float64):
        self.ln1 = LayerNorm(width, dtype=dtype)
        self.attn = CausalSelfAttention(width, heads, context, rng, dtype=dtype)
        self.ln2 = LayerNorm(width, dtype=dtype)
        self.fc1 = Affine(width, mlp_ratio * width, rng, dtype=dtype)
        self.fc2 = Affine(mlp_ratio * width, width, rng, scale=0.1, dtype=dtype)

    def __call__(self, x) -> Tensor:
        x = ops.add(x, self.attn(self.ln1(x)))
        x = ops.add(x, self.fc2(ops.gelu(self.fc1(self.ln2(x)))))
        return x


class Mlp(Module):
    """Plain MLP; ReLU between layers, linear output."""

    def __init__(self, sizes: list[int], rng: np.random.Generator,
                 out_scale: float = 1.0, dtype=np.float64):
        if len(sizes) < 2:
            raise ValueError("Mlp needs at least input and output sizes")
        self.layers = [
            Affine(a, b, rng, scale=(out_scale if i == len(sizes) - 2 else 1.0), dtype=dtype)
            for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:]))
        ]

    def __call__(self, x) -> Tensor:
        for layer in self.layers[:-1]:
            x = ops.relu(layer(x))
        return self.layers[-1](x)


class PointNetEncoder(Module):
    """Permutation-invariant cloud encoder: shared per-point MLP, channelwise
    max pool over points, affine to the output width."""

    def __init__(self, out_width: int, rng: np.random.Generator,
                 hidden: tuple[int, int] = (64, 64), dtype=np.float64):
        self.fc1 = Affine(3, hidden[0], rng, dtype=dtype)
        self.fc2 = Affine(hidden[0], hidden[1], rng, dtype=dtype)
        self.head = Affine(hidden[1], out_width, rng, dtype=dtype)

    def __call__(self, clouds) -> Tensor:
        cd = clouds.data if isinstance(clouds, Tensor) else np.asarray(clouds)
        if cd.ndim < 2 or cd.shape[-2] == 0:
            raise ValueError(f"point cloud must have at least one point, got shape {cd.shape}")
        feats = ops.relu(self.fc2(ops.relu(self.fc1(clouds))))
        pooled = ops.amax(feats, axis=-2)
        return self.head(pooled)

    def point_features(self, clouds) -> Tensor:
        """Per-point features before pooling (used by tests)."""
        return ops.relu(self.fc2(ops.relu(self.fc1(clouds))))
