"""Minimal reverse-mode differentiation engine for the duplicate-question CNN."""

from .gradcheck import GradCheckResult, grad_check, relative_error
from .ops import (
    BatchNormState,
    affine,
    batch_norm,
    chunked_max_pool,
    concat,
    conv1d_relu,
    cosine_lambda,
    dropout,
    embedding,
    global_max_pool,
    global_min_pool,
    softmax,
    softmax_cross_entropy,
    stack_last,
    temporal_chunk_max_pool,
    weighted_sum,
)
from .optim import adam_step, xavier_bound, xavier_init
from .tensor import Parameter, Tensor, constant

__all__ = [
    "BatchNormState", "GradCheckResult", "Parameter", "Tensor", "adam_step", "affine",
    "batch_norm", "chunked_max_pool", "concat", "constant", "conv1d_relu", "cosine_lambda",
    "dropout", "embedding", "global_max_pool", "global_min_pool", "grad_check",
    "relative_error", "softmax", "softmax_cross_entropy", "stack_last",
    "temporal_chunk_max_pool", "weighted_sum", "xavier_bound", "xavier_init",
]
