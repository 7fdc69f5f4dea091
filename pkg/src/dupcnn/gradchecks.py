"""Registry of finite-difference checks for every differentiable op and the full model."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import DuplicateModel, EncodedPair, ModelConfig, pad_ids
from .tensorcore import (
    BatchNormState,
    GradCheckResult,
    Parameter,
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
    grad_check,
    softmax_cross_entropy,
    stack_last,
    temporal_chunk_max_pool,
    weighted_sum,
)

OP_THRESHOLD = 1e-6
MODEL_THRESHOLD = 1e-4
STEP = 1e-5


@dataclass
class CheckOutcome:
    name: str
    result: GradCheckResult
    threshold: float
    seconds: float

    @property
    def passed(self) -> bool:
        return self.result.passed(self.threshold)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} {self.name} max_rel_err={self.result.max_rel_error:.3e} "
            f"threshold={self.threshold:.0e} checked={self.result.checked} "
            f"worst={self.result.worst_input}{list(self.result.worst_index)} t={self.seconds:.1f}s"
        )


def _param(rng, shape, name, scale=1.0):
    return Parameter(rng.normal(size=shape) * scale, name)


def _spread(rng, shape, gap=0.05):
    """Values with pairwise gaps >= ``gap`` so argmax/argmin never flip under a +-h nudge."""
    size = int(np.prod(shape))
    vals = (np.arange(size) - size / 2) * gap + rng.uniform(0, gap / 4, size)
    return rng.permutation(vals).reshape(shape)


def _fault(on: bool):
    if not on:
        return None
    return lambda i, g: g * 1.5 + (1.0 if i == 0 else 0.0)


def check_embedding(rng, fault):
    table = _param(rng, (6, 3), "table")
    # id 0 is padding and deliberately receives no gradient, so it is left out here
    ids = np.array([[2, 3, 4], [5, 2, 1]])
    w = rng.normal(size=(2, 3, 3))
    return grad_check(lambda: weighted_sum(embedding(table, ids), w), [table], STEP, _fault(fault))


def _bn_case(rng, training, fault):
    x = _param(rng, (3, 4, 5), "x")
    mask = np.array([[1, 1, 1, 0], [1, 1, 0, 0], [1, 1, 1, 1]], dtype=bool)
    gamma = Parameter(rng.uniform(0.5, 1.5, 5), "gamma")
    beta = _param(rng, (5,), "beta")
    w = rng.normal(size=(3, 4, 5))
    running = BatchNormState(rng.normal(size=5) * 0.1, rng.uniform(0.5, 2.0, 5))

    def fn():
        state = BatchNormState(running.running_mean.copy(), running.running_var.copy())
        return weighted_sum(batch_norm(x, mask, gamma, beta, state, training), w)

    return grad_check(fn, [x, gamma, beta], STEP, _fault(fault))


def check_batch_norm(rng, fault):
    return _bn_case(rng, True, fault)


def check_batch_norm_fixed(rng, fault):
    return _bn_case(rng, False, fault)


def check_conv(rng, fault):
    # resample until every pre-activation is at least 0.1 away from the ReLU kink
    for _ in range(1000):
        x = _param(rng, (2, 6, 4), "x")
        filt = _param(rng, (3, 2, 4), "filters")
        bias = _param(rng, (3,), "bias")
        win = np.lib.stride_tricks.sliding_window_view(x.data, 2, axis=1)
        z = np.einsum("bmdh,fhd->bmf", win, filt.data) + bias.data
        if np.abs(z).min() >= 0.1:
            break
    w = rng.normal(size=(2, 5, 3))
    return grad_check(lambda: weighted_sum(conv1d_relu(x, filt, bias), w), [x, filt, bias], STEP, _fault(fault))


def check_max_pool(rng, fault):
    c = Parameter(_spread(rng, (2, 5, 3)), "c")
    w = rng.normal(size=(2, 3))
    return grad_check(lambda: weighted_sum(global_max_pool(c), w), [c], STEP, _fault(fault))


def check_min_pool(rng, fault):
    c = Parameter(_spread(rng, (2, 5, 3)), "c")
    w = rng.normal(size=(2, 3))
    return grad_check(lambda: weighted_sum(global_min_pool(c), w), [c], STEP, _fault(fault))


def check_chunked_max_pool(rng, fault):
    c = Parameter(_spread(rng, (2, 3, 8)), "c")
    w = rng.normal(size=(2, 4))
    return grad_check(lambda: weighted_sum(chunked_max_pool(c, 4), w), [c], STEP, _fault(fault))


def check_temporal_chunk_max_pool(rng, fault):
    c = Parameter(_spread(rng, (2, 7, 3)), "c")
    w = rng.normal(size=(2, 12))
    return grad_check(lambda: weighted_sum(temporal_chunk_max_pool(c, 4), w), [c], STEP, _fault(fault))


def check_cosine(rng, fault):
    f1 = _param(rng, (3, 5), "f1")
    f2 = _param(rng, (3, 5), "f2")
    lam = Parameter(np.array(0.35), "lambda")
    w = rng.normal(size=3)
    return grad_check(lambda: weighted_sum(cosine_lambda(f1, f2, lam), w), [f1, f2, lam], STEP, _fault(fault))


def check_concat(rng, fault):
    a, b = _param(rng, (2, 1), "a"), _param(rng, (2, 3), "b")
    w = rng.normal(size=(2, 4))
    return grad_check(lambda: weighted_sum(concat([a, b]), w), [a, b], STEP, _fault(fault))


def check_stack(rng, fault):
    a, b = _param(rng, (3,), "a"), _param(rng, (3,), "b")
    w = rng.normal(size=(3, 2))
    return grad_check(lambda: weighted_sum(stack_last([a, b]), w), [a, b], STEP, _fault(fault))


def check_affine(rng, fault):
    x = _param(rng, (3, 5), "x")
    weight = _param(rng, (2, 5), "W")
    bias = _param(rng, (2,), "b")
    w = rng.normal(size=(3, 2))
    return grad_check(lambda: weighted_sum(affine(x, weight, bias), w), [x, weight, bias], STEP, _fault(fault))


def check_softmax_ce(rng, fault):
    logits = _param(rng, (4, 2), "logits")
    labels = np.array([0, 1, 1, 0])
    return grad_check(lambda: softmax_cross_entropy(logits, labels)[0], [logits], STEP, _fault(fault))


def check_dropout(rng, fault):
    x = _param(rng, (4, 6), "x")
    w = rng.normal(size=(4, 6))
    # a fresh generator per call keeps the mask fixed across evaluations
    fn = lambda: weighted_sum(dropout(x, 0.3, True, np.random.default_rng(11)), w)  # noqa: E731
    return grad_check(fn, [x], STEP, _fault(fault))


def micro_model(seed: int = 0) -> tuple[DuplicateModel, list[EncodedPair]]:
    """Tiny full-architecture model and a 2-pair batch for end-to-end checks.

    Biases are positive and offsets interior so no ReLU kink or clamp bound sits
    within a finite-difference step; batch norm runs on fixed random statistics.
    """
    rng = np.random.default_rng(seed)
    cfg = ModelConfig(filters=4, dim=4, n_question=8, n_unique=8, n_keyword=8, dropout=0.0)
    vocab_size = 14
    matrix = rng.normal(size=(vocab_size, cfg.dim))
    model = DuplicateModel(cfg, matrix, seed=seed)
    for p in model.parameters():
        if p.name.endswith(".bias") and p.name.startswith("conv."):
            p.data[...] = rng.uniform(0.1, 0.5, p.shape)
        elif p.bounds is not None:
            p.data[...] = rng.uniform(0.2, 0.8)
        elif p.name.startswith("bn.") and p.name.endswith("gamma"):
            p.data[...] = rng.uniform(0.5, 1.5, p.shape)
        elif p.name.startswith("bn.") and p.name.endswith("beta"):
            p.data[...] = rng.normal(size=p.shape) * 0.1
    for branch in model.branches.values():
        branch.bn.running_mean = rng.normal(size=cfg.dim) * 0.1
        branch.bn.running_var = rng.uniform(0.5, 2.0, cfg.dim)

    def enc(ids, n):
        return pad_ids(ids, n)

    batch = [
        EncodedPair((enc([2, 3, 4, 5, 6], 8), enc([2, 3, 7, 8], 8)),
                    (enc([4, 5, 6], 8), enc([7, 8], 8)),
                    (enc([6, 5, 4], 8), enc([8, 7, 3], 8)), label=1),
        EncodedPair((enc([9, 10, 11, 12, 13, 2], 8), enc([3, 4, 5], 8)),
                    (enc([9, 10, 11, 12, 13, 2], 8), enc([3, 4, 5], 8)),
                    (enc([13, 12, 11], 8), enc([5, 4, 3], 8)), label=0),
    ]
    return model, batch


def check_model(rng, fault):
    model, batch = micro_model(int(rng.integers(1 << 31)))
    labels = np.array([p.label for p in batch])
    params = model.parameters()

    def fn():
        return softmax_cross_entropy(model.forward(batch, training=False).logits, labels)[0]

    return grad_check(fn, params, STEP, _fault(fault))


CHECKS: dict[str, tuple[Callable, float]] = {
    "embedding": (check_embedding, OP_THRESHOLD),
    "batch_norm": (check_batch_norm, OP_THRESHOLD),
    "batch_norm_fixed": (check_batch_norm_fixed, OP_THRESHOLD),
    "conv": (check_conv, OP_THRESHOLD),
    "max_pool": (check_max_pool, OP_THRESHOLD),
    "min_pool": (check_min_pool, OP_THRESHOLD),
    "chunked_max_pool": (check_chunked_max_pool, OP_THRESHOLD),
    "temporal_chunk_max_pool": (check_temporal_chunk_max_pool, OP_THRESHOLD),
    "cosine": (check_cosine, OP_THRESHOLD),
    "concat": (check_concat, OP_THRESHOLD),
    "stack": (check_stack, OP_THRESHOLD),
    "affine": (check_affine, OP_THRESHOLD),
    "softmax_ce": (check_softmax_ce, OP_THRESHOLD),
    "dropout": (check_dropout, OP_THRESHOLD),
    "model": (check_model, MODEL_THRESHOLD),
}


def run_checks(names: list[str] | None = None, seed: int = 0, inject_fault: str | None = None) -> list[CheckOutcome]:
    names = names or list(CHECKS)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown gradient checks: {unknown}; known: {sorted(CHECKS)}")
    out = []
    for i, name in enumerate(names):
        fn, threshold = CHECKS[name]
        rng = np.random.default_rng([seed, i])
        started = time.perf_counter()
        result = fn(rng, inject_fault == name)
        out.append(CheckOutcome(name, result, threshold, time.perf_counter() - started))
    return out
