"""Tensor node of the reverse-mode engine."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import NumericalError

# Every op output is checked for NaN/Inf while this is on.
CHECK_FINITE = True


class Tensor:
    """A float64 array plus gradient slot and the closure that back-propagates into its parents."""

    __slots__ = ("data", "grad", "parents", "backward_fn", "requires_grad", "name", "op")

    def __init__(
        self,
        data,
        parents: Sequence["Tensor"] = (),
        backward_fn: Callable[[np.ndarray], None] | None = None,
        requires_grad: bool | None = None,
        name: str | None = None,
        op: str = "leaf",
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.parents = tuple(parents)
        self.backward_fn = backward_fn
        if requires_grad is None:
            requires_grad = any(p.requires_grad for p in self.parents)
        self.requires_grad = requires_grad
        self.name = name
        self.op = op

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        label = self.name or self.op
        return f"Tensor({label}, shape={self.shape})"

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def trace(self) -> list["Tensor"]:
        """Nodes reachable from here that need gradients, in topological order."""
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                if id(p) not in seen:
                    stack.append((p, False))
        return order

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Reverse sweep; each node's closure runs once, gradients accumulate additively."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(self.data)
        self.accumulate(grad)
        for node in reversed(self.trace()):
            if node.backward_fn is not None and node.grad is not None:
                node.backward_fn(node.grad)
                if node.parents:
                    node.grad = None  # interior node; free memory once consumed

    def __getitem__(self, index) -> "Tensor":
        src = self

        def backward_fn(g):
            full = np.zeros_like(src.data)
            full[index] += g
            src.accumulate(full)

        return make(self.data[index], (self,), backward_fn, "slice")


class Parameter(Tensor):
    """Trainable tensor with Adam moments; ``bounds`` re-clamps after each update."""

    __slots__ = ("m", "v", "t", "bounds")

    def __init__(self, data, name: str, bounds: tuple[float, float] | None = None):
        super().__init__(data, requires_grad=True, name=name, op="param")
        self.m = np.zeros_like(self.data)
        self.v = np.zeros_like(self.data)
        self.t = 0
        self.bounds = bounds


def constant(data, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=False, name=name, op="const")


def check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"non-finite values produced by {what}")


def make(data, parents, backward_fn, op: str) -> Tensor:
    if CHECK_FINITE:
        check_finite(data, op)
    return Tensor(data, parents, backward_fn, op=op)
