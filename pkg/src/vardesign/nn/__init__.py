"""Self-contained autodiff and network toolkit used by the design models."""

from . import tensor
from .checkpoint import MAGIC, load_checkpoint, save_checkpoint
from .layers import LEAKY_SLOPE, Net
from .optim import Adam
from .tensor import (Tensor, bce_with_logits, concat, exp, leaky_relu, narrow,
                     relu, sigmoid, sum_all)

__all__ = [
    "Adam", "LEAKY_SLOPE", "MAGIC", "Net", "Tensor", "bce_with_logits",
    "concat", "exp", "leaky_relu", "load_checkpoint", "narrow", "relu",
    "save_checkpoint", "sigmoid", "sum_all", "tensor",
]
