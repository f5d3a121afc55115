"""Dense float64 arithmetic with a small reverse-mode differentiation tape.

Values are plain ``numpy.ndarray`` objects (float64, row-major, row = batch
element).  A :class:`Tape` records every primitive applied to its
:class:`Var` handles together with a vector-Jacobian product, and
:meth:`Tape.backward` sweeps the record in reverse.

Example::

    tape = Tape()
    w = tape.leaf(np.ones((3, 2)))
    x = tape.constant(np.arange(6.0).reshape(2, 3))
    loss = total(sigmoid(x @ w))
    grads = tape.backward(loss)
    grads[w]          # same shape as w.value
"""

from __future__ import annotations

from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import expit

from .errors import ContractError, DimensionError

DTYPE = np.float64

__all__ = [
    "Tape",
    "Var",
    "Gradients",
    "as_tensor",
    "check_finite",
    "matmul",
    "add",
    "sub",
    "mul",
    "scale",
    "sigmoid",
    "tanh",
    "concat",
    "take",
    "stack",
    "total",
    "softmax_rows",
]


def as_tensor(x) -> np.ndarray:
    return np.asarray(x, dtype=DTYPE)


def check_finite(x, what="tensor"):
    """Raise ``FloatingPointError`` if ``x`` holds NaN or Inf."""
    arr = x.value if isinstance(x, Var) else np.asarray(x)
    if not np.all(np.isfinite(arr)):
        bad = int(np.size(arr) - np.count_nonzero(np.isfinite(arr)))
        raise FloatingPointError(f"{what} has {bad} non-finite element(s)")
    return x


class _Scatter:
    """Gradient that is nonzero only on ``index`` along ``axis``."""

    __slots__ = ("axis", "index", "value")

    def __init__(self, axis, index, value):
        self.axis = axis
        self.index = index
        self.value = value


class Var:
    """Handle to one recorded value on a tape."""

    __slots__ = ("tape", "index", "value")
    __array_priority__ = 100

    def __init__(self, tape, index, value):
        self.tape = tape
        self.index = index
        self.value = value

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        return f"Var(#{self.index}, shape={self.value.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, float(other))
        return mul(self, other)

    def __rmul__(self, other):
        if np.isscalar(other):
            return scale(self, float(other))
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)


class _Node:
    __slots__ = ("op", "parents", "vjp", "needs_grad")

    def __init__(self, op, parents, vjp, needs_grad):
        self.op = op
        self.parents = parents
        self.vjp = vjp
        self.needs_grad = needs_grad


class Gradients(Mapping):
    """Result of :meth:`Tape.backward`, indexed by :class:`Var`.

    Nodes that the loss does not depend on report zeros of the right shape.
    """

    def __init__(self, tape, grads):
        self._tape = tape
        self._grads = grads

    def __getitem__(self, var):
        if var.tape is not self._tape:
            raise ContractError("variable belongs to a different tape")
        g = self._grads[var.index]
        if g is None:
            return np.zeros_like(var.value)
        return g

    def __iter__(self):
        return iter(i for i, g in enumerate(self._grads) if g is not None)

    def __len__(self):
        return sum(g is not None for g in self._grads)


class Tape:
    """Append-only record of primitive applications."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self.values: list[np.ndarray] = []

    def __len__(self):
        return len(self.nodes)

    def _push(self, value, op, parents, vjp, needs_grad):
        self.nodes.append(_Node(op, parents, vjp, needs_grad))
        self.values.append(value)
        return Var(self, len(self.nodes) - 1, value)

    def leaf(self, value) -> Var:
        """Differentiable input (a parameter)."""
        return self._push(as_tensor(value), "leaf", (), None, True)

    def constant(self, value) -> Var:
        return self._push(as_tensor(value), "const", (), None, False)

    def params(self, arrays: Mapping[str, np.ndarray]) -> dict[str, Var]:
        return {name: self.leaf(a) for name, a in arrays.items()}

    def record(self, op: str, value, parents: Sequence[Var], vjp: Callable) -> Var:
        """Register a primitive result.

        ``vjp(g)`` receives the upstream gradient (shape of ``value``) and
        returns one gradient per parent, in order.
        """
        for p in parents:
            if p.tape is not self:
                raise ContractError(f"{op}: operand recorded on a different tape")
        needs = any(self.nodes[p.index].needs_grad for p in parents)
        return self._push(value, op, tuple(p.index for p in parents), vjp, needs)

    def lift(self, x) -> Var:
        if isinstance(x, Var):
            return x
        return self.constant(x)

    def backward(self, loss: Var) -> Gradients:
        if loss.tape is not self:
            raise ContractError("loss belongs to a different tape")
        if loss.value.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.value.shape}")
        n = loss.index + 1
        grads: list = [None] * len(self.nodes)
        owned = [False] * len(self.nodes)
        grads[loss.index] = np.ones_like(loss.value)
        owned[loss.index] = True
        for i in range(n - 1, -1, -1):
            g = grads[i]
            node = self.nodes[i]
            if g is None or not node.parents or not node.needs_grad:
                continue
            parent_grads = node.vjp(g)
            for p, pg in zip(node.parents, parent_grads):
                if pg is None or not self.nodes[p].needs_grad:
                    continue
                if isinstance(pg, _Scatter):
                    if grads[p] is None:
                        grads[p] = np.zeros_like(self.values[p])
                        owned[p] = True
                    elif not owned[p]:
                        grads[p] = grads[p].copy()
                        owned[p] = True
                    idx = [slice(None)] * grads[p].ndim
                    idx[pg.axis] = pg.index
                    grads[p][tuple(idx)] += pg.value
                elif grads[p] is None:
                    grads[p] = pg
                    owned[p] = False
                elif owned[p]:
                    grads[p] += pg
                else:
                    grads[p] = grads[p] + pg
                    owned[p] = True
        return Gradients(self, grads)


def _tape_of(*xs) -> Tape:
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    raise ContractError("at least one operand must be a Var")


def _vars(*xs):
    tape = _tape_of(*xs)
    return tape, [tape.lift(x) for x in xs]


def matmul(a, b) -> Var:
    tape, (a, b) = _vars(a, b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    av, bv = a.value, b.value

    def vjp(g):
        return g @ bv.T, av.T @ g

    return tape.record("matmul", av @ bv, (a, b), vjp)


def _check_add_shapes(op, a, b):
    if a.shape == b.shape:
        return False
    # bias row-vector on the last axis is the only broadcast allowed
    if b.ndim == 1 and a.ndim >= 1 and a.shape[-1] == b.shape[0]:
        return True
    raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not match")


def _reduce_bias(g, ndim):
    return g.reshape(-1, g.shape[-1]).sum(axis=0) if ndim == 1 else g


def add(a, b) -> Var:
    """Elementwise sum; ``b`` may also be a bias vector over the last axis."""
    tape, (a, b) = _vars(a, b)
    bias = _check_add_shapes("add", a, b)

    def vjp(g):
        return g, (_reduce_bias(g, 1) if bias else g)

    return tape.record("add", a.value + b.value, (a, b), vjp)


def sub(a, b) -> Var:
    tape, (a, b) = _vars(a, b)
    bias = _check_add_shapes("sub", a, b)

    def vjp(g):
        return g, -(_reduce_bias(g, 1) if bias else g)

    return tape.record("sub", a.value - b.value, (a, b), vjp)


def mul(a, b) -> Var:
    tape, (a, b) = _vars(a, b)
    if a.shape != b.shape:
        raise DimensionError(f"mul: shapes {a.shape} and {b.shape} do not match")
    av, bv = a.value, b.value

    def vjp(g):
        return g * bv, g * av

    return tape.record("mul", av * bv, (a, b), vjp)


def scale(a: Var, k: float) -> Var:
    def vjp(g):
        return (g * k,)

    return a.tape.record("scale", a.value * k, (a,), vjp)


def sigmoid(x: Var) -> Var:
    y = expit(x.value)

    def vjp(g):
        return (g * y * (1.0 - y),)

    return x.tape.record("sigmoid", y, (x,), vjp)


def tanh(x: Var) -> Var:
    y = np.tanh(x.value)

    def vjp(g):
        return (g * (1.0 - y * y),)

    return x.tape.record("tanh", y, (x,), vjp)


def concat(xs: Sequence, axis: int = -1) -> Var:
    tape, xs = _vars(*xs)
    ndim = xs[0].ndim
    if any(x.ndim != ndim for x in xs):
        raise DimensionError(f"concat: rank mismatch {[x.shape for x in xs]}")
    ax = axis % ndim if ndim else 0
    if ndim == 0 or not -ndim <= axis < ndim:
        raise DimensionError(f"concat: axis {axis} invalid for rank {ndim}")
    for x in xs[1:]:
        if x.shape[:ax] + x.shape[ax + 1:] != xs[0].shape[:ax] + xs[0].shape[ax + 1:]:
            raise DimensionError(f"concat: shapes {[x.shape for x in xs]} differ off axis {axis}")
    bounds = np.cumsum([x.shape[ax] for x in xs])[:-1]

    def vjp(g):
        return tuple(np.split(g, bounds, axis=ax))

    return tape.record("concat", np.concatenate([x.value for x in xs], axis=ax), xs, vjp)


def take(x: Var, index: int, axis: int) -> Var:
    """Select one position along ``axis`` (the axis is dropped)."""
    if not -x.shape[axis] <= index < x.shape[axis]:
        raise DimensionError(f"take: index {index} out of range for axis of length {x.shape[axis]}")
    ax = axis % x.ndim

    def vjp(g):
        return (_Scatter(ax, index, g),)

    return x.tape.record("take", np.take(x.value, index, axis=ax), (x,), vjp)


def stack(xs: Sequence[Var], axis: int = 0) -> Var:
    tape, xs = _vars(*xs)
    if len({x.shape for x in xs}) != 1:
        raise DimensionError(f"stack: shapes differ {[x.shape for x in xs]}")
    ax = axis % (xs[0].ndim + 1)

    def vjp(g):
        return tuple(np.take(g, i, axis=ax) for i in range(len(xs)))

    return tape.record("stack", np.stack([x.value for x in xs], axis=ax), xs, vjp)


def total(x: Var) -> Var:
    """Sum of all elements, as a scalar."""
    shape = x.shape

    def vjp(g):
        return (np.broadcast_to(g, shape).copy(),)

    return x.tape.record("sum", np.asarray(x.value.sum()), (x,), vjp)


def softmax_rows(x: Var) -> Var:
    if x.ndim != 2:
        raise DimensionError(f"softmax_rows: expected a matrix, got shape {x.shape}")
    z = x.value - x.value.max(axis=1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        return (y * (g - (g * y).sum(axis=1, keepdims=True)),)

    return x.tape.record("softmax_rows", y, (x,), vjp)
