"""Differentiable operations used by the duplicate-question CNN.

Ops accept arbitrary leading batch dimensions unless noted. Gradients of
max/min style reductions go to the first occurring extremum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import NumericalError, ShapeError
from .tensor import Tensor, make

COSINE_EPS = 1e-8
BN_EPS = 1e-5


def embedding(table: Tensor, ids: np.ndarray, padding_id: int = 0) -> Tensor:
    """Row gather; the padding row receives no gradient."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError(f"embedding ids outside [0, {table.shape[0]})")

    def backward_fn(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        full[padding_id] = 0.0
        table.accumulate(full)

    return make(table.data[ids], (table,), backward_fn, "embedding")


def conv1d_relu(
    x: Tensor, filters: Tensor, bias: Tensor, lengths: np.ndarray | None = None
) -> Tensor:
    """Valid 1-d convolution over positions followed by ReLU.

    x: (..., n, d), filters: (F, h, d), bias: (F,) -> (..., n-h+1, F)

    ``lengths`` (shape x.shape[:-2]) declares that positions at or beyond each
    sequence's length are zero padding. Windows lying wholly in the padding
    then evaluate to relu(bias) without a matmul, and padded positions are
    treated as constants (they receive no gradient).
    """
    f_count, h, d = filters.shape
    n = x.shape[-2]
    if x.shape[-1] != d:
        raise ShapeError(f"conv input dim {x.shape[-1]} != filter dim {d}")
    if n < h:
        raise ShapeError(f"sequence length {n} shorter than filter width {h}")
    lead = x.shape[:-2]
    m = n - h + 1
    x3 = x.data.reshape(-1, n, d)
    rows = x3.shape[0]
    if lengths is None:
        valid = np.full(rows, m, dtype=np.int64)
    else:
        valid = np.minimum(np.asarray(lengths, dtype=np.int64).reshape(-1), m)
    bi = np.repeat(np.arange(rows), valid)
    ii = np.arange(bi.shape[0]) - np.repeat(np.cumsum(valid) - valid, valid)
    # im2col over the valid windows only: (R, d, h) -> (R, h*d)
    cols = np.swapaxes(sliding_window_view(x3, h, axis=1)[bi, ii], -1, -2).reshape(-1, h * d)
    w_flat = filters.data.reshape(f_count, h * d)
    z = np.broadcast_to(bias.data, (rows, m, f_count)).copy()
    z[bi, ii] = cols @ w_flat.T + bias.data
    active = z > 0
    out = np.where(active, z, 0.0)

    def backward_fn(g):
        gz = g.reshape(rows, m, f_count) * active
        if bias.requires_grad:
            bias.accumulate(gz.sum(axis=(0, 1)))
        gzv = gz[bi, ii]
        if filters.requires_grad:
            filters.accumulate((gzv.T @ cols).reshape(f_count, h, d))
        if x.requires_grad:
            dcols = (gzv @ w_flat).reshape(-1, h, d)
            dx = np.zeros_like(x3)
            for r in range(h):
                dx[bi, ii + r] += dcols[:, r, :]  # (bi, ii + r) pairs are distinct for fixed r
            x.accumulate(dx.reshape(x.shape))

    return make(out.reshape(*lead, m, f_count), (x, filters, bias), backward_fn, "conv1d_relu")


def _pool_along_rows(c: Tensor, pick, op: str) -> Tensor:
    if c.shape[-2] < 1:
        raise ShapeError(f"{op} needs at least one row")
    idx = pick(c.data, axis=-2)
    out = np.take_along_axis(c.data, idx[..., None, :], axis=-2)[..., 0, :]

    def backward_fn(g):
        full = np.zeros_like(c.data)
        np.put_along_axis(full, idx[..., None, :], g[..., None, :], axis=-2)
        c.accumulate(full)

    return make(out, (c,), backward_fn, op)


def global_max_pool(c: Tensor) -> Tensor:
    """(..., m, F) -> (..., F): column maxima."""
    return _pool_along_rows(c, np.argmax, "global_max_pool")


def global_min_pool(c: Tensor) -> Tensor:
    """(..., m, F) -> (..., F): column minima."""
    return _pool_along_rows(c, np.argmin, "global_min_pool")


def chunked_max_pool(c: Tensor, chunks: int = 4) -> Tensor:
    """Split the filter axis into ``chunks`` blocks and take each block's scalar max.

    (..., m, F) -> (..., chunks). Ties go to the first entry in row-major order
    within the block.
    """
    m, f_count = c.shape[-2:]
    if chunks < 1 or f_count % chunks:
        raise ShapeError(f"filter count {f_count} not divisible into {chunks} chunks")
    w = f_count // chunks
    lead = c.shape[:-2]
    blocks = np.swapaxes(c.data.reshape(*lead, m, chunks, w), -3, -2).reshape(*lead, chunks, m * w)
    idx = np.argmax(blocks, axis=-1)
    out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]

    def backward_fn(g):
        gb = np.zeros_like(blocks)
        np.put_along_axis(gb, idx[..., None], g[..., None], axis=-1)
        full = np.swapaxes(gb.reshape(*lead, chunks, m, w), -3, -2).reshape(c.shape)
        c.accumulate(full)

    return make(out, (c,), backward_fn, "chunked_max_pool")


def chunk_bounds(m: int, chunks: int) -> list[tuple[int, int]]:
    """Near-equal contiguous row ranges; ranges overlap when m < chunks."""
    bounds = []
    for j in range(chunks):
        lo = (j * m) // chunks
        hi = max(((j + 1) * m) // chunks, lo + 1)
        lo = min(lo, m - 1)
        bounds.append((lo, min(hi, m)))
    return bounds


def temporal_chunk_max_pool(c: Tensor, chunks: int = 4) -> Tensor:
    """Alternative pooling: per-filter max inside each positional chunk.

    (..., m, F) -> (..., chunks * F), chunk-major.
    """
    m, f_count = c.shape[-2:]
    parts = []
    idxs = []
    for lo, hi in chunk_bounds(m, chunks):
        i = np.argmax(c.data[..., lo:hi, :], axis=-2) + lo
        idxs.append(i)
        parts.append(np.take_along_axis(c.data, i[..., None, :], axis=-2)[..., 0, :])
    out = np.concatenate(parts, axis=-1)

    def backward_fn(g):
        full = np.zeros_like(c.data)
        for j, i in enumerate(idxs):
            part = np.zeros_like(c.data)
            np.put_along_axis(part, i[..., None, :], g[..., j * f_count : (j + 1) * f_count, None].swapaxes(-1, -2), axis=-2)
            full += part  # chunks may overlap when m < chunks
        c.accumulate(full)

    return make(out, (c,), backward_fn, "temporal_chunk_max_pool")


def cosine_lambda(f1: Tensor, f2: Tensor, lam: Tensor) -> Tensor:
    """cos(f1, f2) + clamp(lam, 0, 1) over the last axis.

    The norm product is floored at 1e-8. The offset's gradient is blocked when
    it sits at a bound and descent would push it further out.
    """
    a, b = f1.data, f2.data
    if a.shape != b.shape:
        raise ShapeError(f"cosine operands differ: {a.shape} vs {b.shape}")
    dot = np.sum(a * b, axis=-1)
    n1 = np.sqrt(np.sum(a * a, axis=-1))
    n2 = np.sqrt(np.sum(b * b, axis=-1))
    denom = n1 * n2
    floored = denom <= COSINE_EPS
    safe = np.where(floored, COSINE_EPS, denom)
    cos = dot / safe
    lam_val = float(lam.data)
    out = cos + min(max(lam_val, 0.0), 1.0)

    def backward_fn(g):
        gcol = g[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = np.where(floored, 0.0, cos / np.where(floored, 1.0, n1 * n1))[..., None]
            r2 = np.where(floored, 0.0, cos / np.where(floored, 1.0, n2 * n2))[..., None]
        if f1.requires_grad:
            f1.accumulate(gcol * (b / safe[..., None] - r1 * a))
        if f2.requires_grad:
            f2.accumulate(gcol * (a / safe[..., None] - r2 * b))
        if lam.requires_grad:
            total = float(np.sum(g))
            if (lam_val >= 1.0 and total < 0) or (lam_val <= 0.0 and total > 0):
                total = 0.0
            lam.accumulate(np.asarray(total).reshape(lam.shape))

    return make(out, (f1, f2, lam), backward_fn, "cosine_lambda")


def concat(xs: list[Tensor], axis: int = -1) -> Tensor:
    sizes = [x.shape[axis] for x in xs]
    offsets = np.cumsum([0] + sizes)

    def backward_fn(g):
        for x, lo, hi in zip(xs, offsets[:-1], offsets[1:]):
            if x.requires_grad:
                x.accumulate(np.take(g, np.arange(lo, hi), axis=axis))

    return make(np.concatenate([x.data for x in xs], axis=axis), tuple(xs), backward_fn, "concat")


def stack_last(xs: list[Tensor]) -> Tensor:
    """Stack tensors of identical shape along a new trailing axis."""

    def backward_fn(g):
        for i, x in enumerate(xs):
            if x.requires_grad:
                x.accumulate(g[..., i])

    return make(np.stack([x.data for x in xs], axis=-1), tuple(xs), backward_fn, "stack")


def affine(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """x @ weight.T + bias with x: (..., k), weight: (out, k), bias: (out,)."""
    if x.shape[-1] != weight.shape[1] or bias.shape != (weight.shape[0],):
        raise ShapeError(f"affine shapes x{x.shape} W{weight.shape} b{bias.shape}")

    def backward_fn(g):
        if weight.requires_grad:
            weight.accumulate(g.reshape(-1, weight.shape[0]).T @ x.data.reshape(-1, weight.shape[1]))
        if bias.requires_grad:
            bias.accumulate(g.reshape(-1, weight.shape[0]).sum(axis=0))
        if x.requires_grad:
            x.accumulate(g @ weight.data)

    return make(x.data @ weight.data.T + bias.data, (x, weight, bias), backward_fn, "affine")


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(
    logits: Tensor, labels: np.ndarray, reduction: str = "mean"
) -> tuple[Tensor, np.ndarray]:
    """Mean (or summed) -log p[label]; returns the loss node and the probabilities."""
    labels = np.asarray(labels, dtype=np.int64)
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    log_p = z - log_norm
    probs = np.exp(log_p)
    picked = np.take_along_axis(log_p, labels[..., None], axis=-1)[..., 0]
    scale = 1.0 / labels.size if reduction == "mean" else 1.0
    loss = -picked.sum() * scale
    onehot = np.zeros_like(probs)
    np.put_along_axis(onehot, labels[..., None], 1.0, axis=-1)

    def backward_fn(g):
        logits.accumulate(g * scale * (probs - onehot))

    return make(np.asarray(loss), (logits,), backward_fn, "softmax_cross_entropy"), probs


def dropout(x: Tensor, rate: float, training: bool, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; identity at inference or when rate is 0."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)

    def backward_fn(g):
        x.accumulate(g * keep)

    return make(x.data * keep, (x,), backward_fn, "dropout")


@dataclass
class BatchNormState:
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.7

    @classmethod
    def fresh(cls, dim: int, momentum: float = 0.7) -> "BatchNormState":
        return cls(np.zeros(dim), np.ones(dim), momentum)


def batch_norm(
    x: Tensor,
    mask: np.ndarray,
    gamma: Tensor,
    beta: Tensor,
    state: BatchNormState,
    training: bool,
) -> Tensor:
    """Per-feature normalisation over all unmasked positions.

    x: (..., F) with mask x.shape[:-1] (True = real element). Masked
    positions come out as zeros and are ignored by the statistics. Training
    mode uses batch statistics and updates the running ones in place:
    running = momentum * running + (1 - momentum) * batch.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape[:-1]:
        raise ShapeError(f"mask shape {mask.shape} does not match {x.shape[:-1]}")
    sel = x.data[mask]
    count = sel.shape[0]
    if training:
        if count == 0:
            raise NumericalError("batch_norm: every position is masked, no statistics")
        mean = sel.mean(axis=0)
        var = ((sel - mean) ** 2).mean(axis=0)
        state.running_mean = state.momentum * state.running_mean + (1 - state.momentum) * mean
        state.running_var = state.momentum * state.running_var + (1 - state.momentum) * var
    else:
        mean, var = state.running_mean, state.running_var
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (sel - mean) * inv_std
    out = np.zeros_like(x.data)
    out[mask] = gamma.data * xhat + beta.data

    def backward_fn(g):
        gs = g[mask]
        if gamma.requires_grad:
            gamma.accumulate((gs * xhat).sum(axis=0))
        if beta.requires_grad:
            beta.accumulate(gs.sum(axis=0))
        if x.requires_grad:
            dxhat = gs * gamma.data
            if training:
                dsel = inv_std / count * (
                    count * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
                )
            else:
                dsel = dxhat * inv_std
            full = np.zeros_like(x.data)
            full[mask] = dsel
            x.accumulate(full)

    return make(out, (x, gamma, beta), backward_fn, "batch_norm")


def weighted_sum(x: Tensor, weights: np.ndarray) -> Tensor:
    """Scalar sum(x * weights); turns any op output into a scalar for checking."""
    weights = np.asarray(weights, dtype=np.float64)

    def backward_fn(g):
        x.accumulate(g * weights)

    return make(np.asarray(np.sum(x.data * weights)), (x,), backward_fn, "weighted_sum")
