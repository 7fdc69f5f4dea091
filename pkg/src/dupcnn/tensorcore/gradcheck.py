"""Central-difference verification of reverse-mode gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


@dataclass
class GradCheckResult:
    max_rel_error: float
    worst_input: str
    worst_index: tuple
    checked: int

    def passed(self, threshold: float) -> bool:
        return self.max_rel_error < threshold


def relative_error(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)


def grad_check(
    fn: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    h: float = 1e-5,
    perturb_analytic: Callable[[int, np.ndarray], np.ndarray] | None = None,
) -> GradCheckResult:
    """Compare backward() gradients of the scalar ``fn()`` with (f(x+h) - f(x-h)) / 2h.

    ``fn`` must rebuild the graph from the current values of ``inputs`` on every
    call and be deterministic. ``perturb_analytic`` lets tests corrupt the
    analytic gradient to prove the harness notices.
    """
    for t in inputs:
        t.grad = None
    fn().backward()
    analytic = [t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in inputs]
    if perturb_analytic is not None:
        analytic = [perturb_analytic(i, g) for i, g in enumerate(analytic)]
    for t in inputs:
        t.grad = None

    worst = (0.0, "", ())
    checked = 0
    for k, t in enumerate(inputs):
        flat = t.data.reshape(-1)
        numeric = np.empty(flat.shape[0])
        for i in range(flat.shape[0]):
            orig = flat[i]
            flat[i] = orig + h
            fp = float(fn().data)
            flat[i] = orig - h
            fm = float(fn().data)
            flat[i] = orig
            numeric[i] = (fp - fm) / (2.0 * h)
        err = relative_error(analytic[k].reshape(-1), numeric)
        checked += err.size
        if err.size and err.max() > worst[0]:
            j = int(err.argmax())
            worst = (float(err.max()), t.name or f"input{k}", np.unravel_index(j, t.shape))
    return GradCheckResult(worst[0], worst[1], tuple(int(i) for i in worst[2]), checked)
