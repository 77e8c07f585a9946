"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

Just enough machinery for the loss kernel and the tag decoder: a Tensor
holds a value, a gradient accumulator, and a closure that pushes its
output gradient back to its parents. Graphs are built eagerly and
differentiated by ``backward()`` on a scalar root. Everything is float64
and deterministic.
"""
from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("value", "grad", "_parents", "_backward")

    def __init__(self, value, parents: tuple["Tensor", ...] = ()):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self._parents = parents
        self._backward = None

    @property
    def shape(self):
        return self.value.shape

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return add(self, scale(_wrap(other), -1.0))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every reachable Tensor."""
        if self.value.ndim != 0 and self.value.size != 1:
            raise ValueError("backward() requires a scalar root")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                stack.append((parent, False))
        for node in order:
            node.grad = np.zeros_like(node.value)
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._backward is not None:
                node._backward()


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.value + b.value, (a, b))

    def backward():
        a.grad += _unbroadcast(out.grad, a.value.shape)
        b.grad += _unbroadcast(out.grad, b.value.shape)

    out._backward = backward
    return out


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.value * b.value, (a, b))

    def backward():
        a.grad += _unbroadcast(out.grad * b.value, a.value.shape)
        b.grad += _unbroadcast(out.grad * a.value, b.value.shape)

    out._backward = backward
    return out


def scale(a, c: float) -> Tensor:
    a = _wrap(a)
    out = Tensor(a.value * c, (a,))

    def backward():
        a.grad += out.grad * c

    out._backward = backward
    return out


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.value.ndim != 2 or b.value.ndim != 2:
        raise ValueError("matmul expects 2-D operands")
    out = Tensor(a.value @ b.value, (a, b))

    def backward():
        a.grad += out.grad @ b.value.T
        b.grad += a.value.T @ out.grad

    out._backward = backward
    return out


def transpose(a) -> Tensor:
    a = _wrap(a)
    out = Tensor(a.value.T, (a,))

    def backward():
        a.grad += out.grad.T

    out._backward = backward
    return out


def reshape(a, shape) -> Tensor:
    a = _wrap(a)
    out = Tensor(a.value.reshape(shape), (a,))

    def backward():
        a.grad += out.grad.reshape(a.value.shape)

    out._backward = backward
    return out


def tanh(a) -> Tensor:
    a = _wrap(a)
    y = np.tanh(a.value)
    out = Tensor(y, (a,))

    def backward():
        a.grad += out.grad * (1.0 - y * y)

    out._backward = backward
    return out


def sigmoid(a) -> Tensor:
    a = _wrap(a)
    # Branch on sign to avoid overflow in exp.
    x = a.value
    y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = Tensor(y, (a,))

    def backward():
        a.grad += out.grad * y * (1.0 - y)

    out._backward = backward
    return out


def exp(a) -> Tensor:
    a = _wrap(a)
    y = np.exp(a.value)
    out = Tensor(y, (a,))

    def backward():
        a.grad += out.grad * y

    out._backward = backward
    return out


def log(a) -> Tensor:
    a = _wrap(a)
    out = Tensor(np.log(a.value), (a,))

    def backward():
        a.grad += out.grad / a.value

    out._backward = backward
    return out


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient passes through only in the open interval."""
    a = _wrap(a)
    out = Tensor(np.clip(a.value, lo, hi), (a,))
    inside = (a.value > lo) & (a.value < hi)

    def backward():
        a.grad += out.grad * inside

    out._backward = backward
    return out


def row_softmax(a) -> Tensor:
    """Softmax along the last axis of a 2-D array (max-shifted for stability)."""
    a = _wrap(a)
    shifted = a.value - a.value.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    out = Tensor(y, (a,))

    def backward():
        g = out.grad
        a.grad += y * (g - (g * y).sum(axis=1, keepdims=True))

    out._backward = backward
    return out


def normalize_rows(a) -> Tensor:
    """Scale every row of a 2-D array to unit Euclidean norm."""
    a = _wrap(a)
    norms = np.linalg.norm(a.value, axis=1, keepdims=True)
    y = a.value / norms
    out = Tensor(y, (a,))

    def backward():
        g = out.grad
        a.grad += (g - y * (g * y).sum(axis=1, keepdims=True)) / norms

    out._backward = backward
    return out


def diagonal(a) -> Tensor:
    a = _wrap(a)
    out = Tensor(np.diagonal(a.value).copy(), (a,))

    def backward():
        g = np.zeros_like(a.value)
        np.fill_diagonal(g, out.grad)
        a.grad += g

    out._backward = backward
    return out


def sum_all(a) -> Tensor:
    a = _wrap(a)
    out = Tensor(a.value.sum(), (a,))

    def backward():
        a.grad += np.broadcast_to(out.grad, a.value.shape)

    out._backward = backward
    return out


def mean_all(a) -> Tensor:
    a = _wrap(a)
    return scale(sum_all(a), 1.0 / a.value.size)
