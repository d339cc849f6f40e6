from .tensor import Tensor, no_grad, grad_enabled
from . import ops
from .layers import (
    Affine,
    LayerNorm,
    CausalSelfAttention,
    TransformerBlock,
    Mlp,
    PointNetEncoder,
    Module,
)
from .adam import Adam, NonFiniteGradientError
from .checkpoint import save_checkpoint, load_checkpoint, CheckpointError

__all__ = [
    "Tensor",
    "no_grad",
    "grad_enabled",
    "ops",
    "Affine",
    "LayerNorm",
    "CausalSelfAttention",
    "TransformerBlock",
    "Mlp",
    "PointNetEncoder",
    "Module",
    "Adam",
    "NonFiniteGradientError",
    "save_checkpoint",
    "load_checkpoint",
    "CheckpointError",
]
