"""Reverse-mode automatic differentiation over dense numpy arrays.

A :class:`Tensor` wraps an ``ndarray`` and, when gradient recording is on,
remembers the operation that produced it.  Calling :meth:`Tensor.backward`
on a scalar walks the recorded graph in reverse topological order.

Only the operations the layers in this package need are provided.  Binary
operations broadcast like numpy; gradients are summed back down to the
operand shape.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np


class NumericsError(ArithmeticError):
    """Raised on non-finite values or inconsistent shapes."""


class DimensionError(NumericsError, ValueError):
    pass


_GRAD_ENABLED = True
_CHECK_FINITE = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


def _check(data: np.ndarray, op: str) -> np.ndarray:
    # a finite sum proves every element finite; only fall back when it is not
    if _CHECK_FINITE and not np.isfinite(data.sum()) and not np.isfinite(data).all():
        raise NumericsError(f"non-finite value produced by {op}")
    return data


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    ndim_extra = grad.ndim - len(shape)
    if ndim_extra > 0:
        grad = grad.sum(axis=tuple(range(ndim_extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """Dense array node in a differentiation graph."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data = _check(arr, "constructor")
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag})"

    def __len__(self) -> int:
        return len(self.data)

    # -- graph construction -----------------------------------------------
    @staticmethod
    def _make(data: np.ndarray, parents: tuple, backward, op: str) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = _check(data, op)
        out.grad = None
        out.name = None
        needs = _GRAD_ENABLED and any(p.requires_grad for p in parents)
        out.requires_grad = needs
        out._parents = parents if needs else ()
        out._backward = backward if needs else None
        return out

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for every leaf."""
        if grad is None:
            if self.data.size != 1:
                raise DimensionError("backward() without a seed needs a scalar output")
            grad = np.ones_like(self.data)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                # leaf
                g = g.astype(node.data.dtype, copy=False)
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                pg = _unbroadcast(pg, parent.shape)
                key = id(parent)
                grads[key] = grads[key] + pg if key in grads else pg

    def zero_grad(self) -> None:
        self.grad = None

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        other = as_tensor(other)
        return Tensor._make(self.data + other.data, (self, other),
                            lambda g: (g, g), "add")

    __radd__ = __add__

    def __sub__(self, other):
        other = as_tensor(other)
        return Tensor._make(self.data - other.data, (self, other),
                            lambda g: (g, -g), "sub")

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __neg__(self):
        return Tensor._make(-self.data, (self,), lambda g: (-g,), "neg")

    def __mul__(self, other):
        other = as_tensor(other)
        a, b = self.data, other.data
        return Tensor._make(a * b, (self, other), lambda g: (g * b, g * a), "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        a, b = self.data, other.data
        return Tensor._make(a / b, (self, other),
                            lambda g: (g / b, -g * a / (b * b)), "div")

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __pow__(self, exponent: float):
        a = self.data
        return Tensor._make(a ** exponent, (self,),
                            lambda g: (g * exponent * a ** (exponent - 1),), "pow")

    def __matmul__(self, other):
        other = as_tensor(other)
        a, b = self.data, other.data
        if a.shape[-1] != b.shape[0] or b.ndim != 2:
            raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

        def backward(g):
            ga = g @ b.T
            gb = a.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            return ga, gb

        return Tensor._make(a @ b, (self, other), backward, "matmul")

    def __getitem__(self, idx):
        shape, dtype = self.data.shape, self.data.dtype

        def backward(g):
            full = np.zeros(shape, dtype=dtype)
            np.add.at(full, idx, g)
            return (full,)

        return Tensor._make(self.data[idx], (self,), backward, "getitem")

    # -- reductions and reshapes ------------------------------------------
    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        shape = self.data.shape

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape),)

        return Tensor._make(self.data.sum(axis=axis, keepdims=keepdims), (self,),
                            backward, "sum")

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        n = self.data.size if axis is None else np.prod(
            [self.data.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(n))

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        orig = self.data.shape
        return Tensor._make(self.data.reshape(shape), (self,),
                            lambda g: (g.reshape(orig),), "reshape")

    # -- elementwise nonlinearities ----------------------------------------
    def exp(self) -> "Tensor":
        out = np.exp(self.data)
        return Tensor._make(out, (self,), lambda g: (g * out,), "exp")

    def log(self) -> "Tensor":
        a = self.data
        if np.any(a <= 0):
            raise NumericsError("log of non-positive value")
        return Tensor._make(np.log(a), (self,), lambda g: (g / a,), "log")

    def tanh(self) -> "Tensor":
        out = np.tanh(self.data)
        return Tensor._make(out, (self,), lambda g: (g * (1.0 - out * out),), "tanh")

    def sigmoid(self) -> "Tensor":
        out = _sigmoid(self.data)
        return Tensor._make(out, (self,), lambda g: (g * out * (1.0 - out),), "sigmoid")

    def softplus(self) -> "Tensor":
        a = self.data
        out = np.logaddexp(0.0, a).astype(a.dtype, copy=False)
        return Tensor._make(out, (self,), lambda g: (g * _sigmoid(a),), "softplus")

    def relu(self) -> "Tensor":
        a = self.data
        mask = a > 0
        return Tensor._make(a * mask, (self,), lambda g: (g * mask,), "relu")

    def elu(self) -> "Tensor":
        a = self.data
        neg = np.expm1(np.minimum(a, 0.0))
        out = np.where(a > 0, a, neg)
        return Tensor._make(out, (self,),
                            lambda g: (g * np.where(a > 0, 1.0, neg + 1.0),), "elu")

    def maximum(self, floor: float) -> "Tensor":
        """Elementwise ``max(self, floor)`` against a constant."""
        a = self.data
        mask = a >= floor
        return Tensor._make(np.where(mask, a, floor).astype(a.dtype), (self,),
                            lambda g: (g * mask,), "maximum")


def _sigmoid(a: np.ndarray) -> np.ndarray:
    # tanh form cannot overflow
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def concat(tensors: Iterable[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    datas = [t.data for t in tensors]
    out = np.concatenate(datas, axis=axis)
    splits = np.cumsum([d.shape[axis] for d in datas])[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._make(out, tuple(tensors), backward, "concat")


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.stack([t.data for t in tensors], axis=axis)

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return Tensor._make(out, tuple(tensors), backward, "stack")


def logsumexp(x: Tensor, axis: int = -1, keepdims: bool = False) -> Tensor:
    a = x.data
    m = a.max(axis=axis, keepdims=True)
    e = np.exp(a - m)
    s = e.sum(axis=axis, keepdims=True)
    out = np.log(s) + m
    soft = e / s

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (g * soft,)

    if not keepdims:
        out = np.squeeze(out, axis=axis)
    return Tensor._make(out, (x,), backward, "logsumexp")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    a = x.data
    e = np.exp(a - a.max(axis=axis, keepdims=True))
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return Tensor._make(out, (x,), backward, "softmax")


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    a = x.data
    shifted = a - a.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    soft = np.exp(out)

    def backward(g):
        return (g - soft * g.sum(axis=axis, keepdims=True),)

    return Tensor._make(out, (x,), backward, "log_softmax")


def straight_through(hard: np.ndarray, soft: Tensor) -> Tensor:
    """Forward value ``hard``; gradient flows to ``soft`` unchanged."""
    hard = np.asarray(hard, dtype=soft.dtype)
    if hard.shape != soft.shape:
        raise DimensionError(f"straight-through shape mismatch {hard.shape} vs {soft.shape}")
    return Tensor._make(hard, (soft,), lambda g: (g,), "straight_through")


def stop_gradient(x: Tensor) -> Tensor:
    return x.detach()
