"""A small reverse-mode automatic differentiation engine over numpy arrays.

Each :class:`Tensor` records the tensors it was computed from and a closure
that pushes its gradient back to them. :func:`backward` walks the graph in
reverse topological order. Everything is float64.

    >>> x = Tensor(3.0, requires_grad=True)
    >>> backward(x * x)
    >>> float(x.grad)
    6.0
"""
from __future__ import annotations

import contextlib

import numpy as np

from .errors import InvalidArgumentError, StateError

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Build no graph inside the block; results are constants."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _unbroadcast(grad, shape):
    # sum out dimensions that were broadcast in the forward pass
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and grad.shape[i] != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("values", "requires_grad", "grad", "_parents", "_backward", "_consumed", "name")

    def __init__(self, values, requires_grad=False, name=None):
        self.values = np.asarray(values, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None
        self._consumed = False
        self.name = name

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def _lift(x):
        return x if isinstance(x, Tensor) else Tensor(x)

    @classmethod
    def _result(cls, values, parents, backward_fn):
        out = cls(values)
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward_fn
        return out

    @property
    def shape(self):
        return self.values.shape

    @property
    def size(self):
        return self.values.size

    def item(self):
        return float(self.values)

    def numpy(self):
        return self.values

    def detach(self):
        return Tensor(self.values.copy())

    def zero_grad(self):
        self.grad = None

    def _accum(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # -- elementwise arithmetic -----------------------------------------------

    def __add__(self, other):
        other = Tensor._lift(other)
        a, b = self, other

        def bw(g):
            if a.requires_grad:
                a._accum(_unbroadcast(g, a.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(g, b.shape))

        return Tensor._result(a.values + b.values, (a, b), bw)

    __radd__ = __add__

    def __neg__(self):
        a = self

        def bw(g):
            a._accum(-g)

        return Tensor._result(-a.values, (a,), bw)

    def __sub__(self, other):
        return self + (-Tensor._lift(other))

    def __rsub__(self, other):
        return Tensor._lift(other) + (-self)

    def __mul__(self, other):
        other = Tensor._lift(other)
        a, b = self, other

        def bw(g):
            if a.requires_grad:
                a._accum(_unbroadcast(g * b.values, a.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(g * a.values, b.shape))

        return Tensor._result(a.values * b.values, (a, b), bw)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Tensor._lift(other)
        a, b = self, other
        out_values = a.values / b.values

        def bw(g):
            if a.requires_grad:
                a._accum(_unbroadcast(g / b.values, a.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(-g * out_values / b.values, b.shape))

        return Tensor._result(out_values, (a, b), bw)

    def __rtruediv__(self, other):
        return Tensor._lift(other) / self

    def __pow__(self, exponent):
        if isinstance(exponent, Tensor):
            raise InvalidArgumentError("tensor exponents are not supported")
        a = self

        def bw(g):
            a._accum(g * exponent * a.values ** (exponent - 1))

        return Tensor._result(a.values ** exponent, (a,), bw)

    def __matmul__(self, other):
        other = Tensor._lift(other)
        a, b = self, other

        def bw(g):
            av, bv = a.values, b.values
            a2 = av[None, :] if av.ndim == 1 else av
            b2 = bv[:, None] if bv.ndim == 1 else bv
            g2 = np.reshape(g, (a2.shape[0], b2.shape[1]))
            if a.requires_grad:
                a._accum((g2 @ b2.T).reshape(av.shape))
            if b.requires_grad:
                b._accum((a2.T @ g2).reshape(bv.shape))

        return Tensor._result(a.values @ b.values, (a, b), bw)

    # -- unary functions ------------------------------------------------------

    def exp(self):
        a = self
        out_values = np.exp(a.values)

        def bw(g):
            a._accum(g * out_values)

        return Tensor._result(out_values, (a,), bw)

    def log(self):
        a = self

        def bw(g):
            a._accum(g / a.values)

        return Tensor._result(np.log(a.values), (a,), bw)

    def tanh(self):
        a = self
        out_values = np.tanh(a.values)

        def bw(g):
            a._accum(g * (1.0 - out_values ** 2))

        return Tensor._result(out_values, (a,), bw)

    def sigmoid(self):
        a = self
        out_values = 0.5 * (1.0 + np.tanh(0.5 * a.values))

        def bw(g):
            a._accum(g * out_values * (1.0 - out_values))

        return Tensor._result(out_values, (a,), bw)

    def clamp_min(self, floor):
        """``max(x, floor)``; the gradient is zero where the floor binds."""
        a = self
        mask = a.values > floor

        def bw(g):
            a._accum(g * mask)

        return Tensor._result(np.where(mask, a.values, floor), (a,), bw)

    # -- reductions and shape -------------------------------------------------

    def sum(self, axis=None):
        a = self

        def bw(g):
            if axis is None:
                a._accum(np.broadcast_to(g, a.shape))
            else:
                a._accum(np.broadcast_to(np.expand_dims(g, axis), a.shape))

        return Tensor._result(a.values.sum(axis=axis), (a,), bw)

    def mean(self, axis=None):
        n = self.values.size if axis is None else self.values.shape[axis]
        return self.sum(axis) * (1.0 / n)

    @property
    def T(self):
        a = self

        def bw(g):
            a._accum(g.T)

        return Tensor._result(a.values.T, (a,), bw)

    def reshape(self, *shape):
        a = self

        def bw(g):
            a._accum(g.reshape(a.shape))

        return Tensor._result(a.values.reshape(*shape), (a,), bw)

    def __getitem__(self, idx):
        a = self

        fancy = isinstance(idx, (list, np.ndarray)) or (
            isinstance(idx, tuple) and any(isinstance(i, (list, np.ndarray)) for i in idx)
        )

        def bw(g):
            full = np.zeros_like(a.values)
            if fancy:
                np.add.at(full, idx, g)
            else:
                full[idx] += g
            a._accum(full)

        return Tensor._result(a.values[idx], (a,), bw)

    def softmax(self, axis=-1):
        a = self
        shifted = a.values - a.values.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        out_values = e / e.sum(axis=axis, keepdims=True)

        def bw(g):
            dot = (g * out_values).sum(axis=axis, keepdims=True)
            a._accum(out_values * (g - dot))

        return Tensor._result(out_values, (a,), bw)


def stack(tensors, axis=0):
    tensors = [Tensor._lift(t) for t in tensors]

    def bw(g):
        for i, t in enumerate(tensors):
            if t.requires_grad:
                t._accum(np.take(g, i, axis=axis))

    return Tensor._result(np.stack([t.values for t in tensors], axis=axis), tuple(tensors), bw)


def concat(tensors, axis=-1):
    tensors = [Tensor._lift(t) for t in tensors]
    sizes = [t.values.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            if t.requires_grad:
                t._accum(piece)

    return Tensor._result(np.concatenate([t.values for t in tensors], axis=axis), tuple(tensors), bw)


def topological_order(root):
    order, seen = [], set()
    stack_ = [(root, False)]
    while stack_:
        node, done = stack_.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack_.append((p, False))
    return order


def backward(loss):
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf that requires it.

    A graph can be walked once; intermediate closures are released after the
    pass. Raises :class:`StateError` for a loss that is not attached to any
    parameter or whose graph was already consumed.
    """
    if hasattr(loss, "scalar"):
        loss = loss.scalar
    if not isinstance(loss, Tensor):
        raise StateError("backward() needs a Tensor or LossValue")
    if loss._consumed:
        raise StateError("backward() was already called on this graph")
    if not loss.requires_grad:
        raise StateError("loss is detached from every parameter; nothing to differentiate")
    if loss.values.size != 1:
        raise InvalidArgumentError(f"loss must be a scalar, got shape {loss.shape}")
    order = topological_order(loss)
    # interior nodes get fresh gradient buffers; leaves accumulate into .grad
    for node in order:
        if node._backward is not None:
            node.grad = None
    loss.grad = np.ones_like(loss.values)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    for node in order:
        if node._backward is not None:
            node.grad = None
            node._backward = None
            node._parents = ()
            node._consumed = True
