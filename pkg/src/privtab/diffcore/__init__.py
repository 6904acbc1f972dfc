"""Minimal reverse-mode autodiff over dense 2-D float64 arrays."""

from .gradcheck import grad_check
from .optim import Adam, adam_step
from .ops import (
    BatchNormState,
    add,
    batch_norm,
    bce_with_logits,
    concat,
    constant,
    gumbel_noise,
    gumbel_softmax,
    layer_norm,
    matmul,
    mean_pool,
    merge_tokens,
    relu,
    scaled_dot_attention,
    sigmoid,
    slice_cols,
    softmax,
    split_tokens,
    weighted_sum,
)
from .tensor import Graph, Tensor, grad_enabled, no_grad

__all__ = [
    "Adam",
    "BatchNormState",
    "Graph",
    "Tensor",
    "adam_step",
    "add",
    "batch_norm",
    "bce_with_logits",
    "concat",
    "constant",
    "grad_check",
    "grad_enabled",
    "gumbel_noise",
    "gumbel_softmax",
    "layer_norm",
    "matmul",
    "mean_pool",
    "merge_tokens",
    "no_grad",
    "relu",
    "scaled_dot_attention",
    "sigmoid",
    "slice_cols",
    "softmax",
    "split_tokens",
    "weighted_sum",
]
