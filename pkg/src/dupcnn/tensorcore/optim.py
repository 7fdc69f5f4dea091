"""Xavier initialisation and the Adam update."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from ..errors import NumericalError
from .tensor import Parameter


def xavier_bound(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def xavier_init(
    shape: tuple[int, ...],
    rng: np.random.Generator,
    fan_in: int | None = None,
    fan_out: int | None = None,
) -> np.ndarray:
    """Uniform(-b, b) with b = sqrt(6 / (fan_in + fan_out)).

    Fans default to the last two axes of ``shape`` (out, in) for matrices.
    Conv filters (F, h, d) should pass fan_in = h*d and fan_out = h*F.
    """
    if fan_in is None or fan_out is None:
        fan_out, fan_in = shape[0], int(np.prod(shape[1:]))
    bound = xavier_bound(fan_in, fan_out)
    return rng.uniform(-bound, bound, size=shape)


def adam_step(
    params: Iterable[Parameter],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """Bias-corrected Adam; clears gradients and re-clamps bounded parameters.

    A parameter without a gradient this step is updated as if its gradient
    were zero, so its moments still decay.
    """
    params = list(params)
    for p in params:
        if p.grad is not None and not np.all(np.isfinite(p.grad)):
            raise NumericalError(f"non-finite gradient for parameter {p.name}")
    for p in params:
        g = p.grad if p.grad is not None else 0.0
        p.t += 1
        p.m *= beta1
        p.m += (1.0 - beta1) * g
        p.v *= beta2
        p.v += (1.0 - beta2) * np.square(g)
        m_hat = p.m / (1.0 - beta1**p.t)
        v_hat = p.v / (1.0 - beta2**p.t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
        if p.bounds is not None:
            np.clip(p.data, p.bounds[0], p.bounds[1], out=p.data)
        p.grad = None
