"""
Differentiable primitives over GradNode.

Forward values come from numpy/scipy; every primitive registers its own
backward rule. Binary elementwise ops follow numpy broadcasting and sum the
adjoint back down to each operand's shape.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special

from wakesleep.base.exceptions import ContractViolation

from .graph import GradNode, as_node

Axis = Optional[Union[int, Tuple[int, ...]]]


def _make(value, parents: Sequence[GradNode], backward_fn, op: str) -> GradNode:
    if any(p.requires_grad for p in parents):
        return GradNode(value, tuple(parents), backward_fn, op=op, requires_grad=True)
    return GradNode(value, op=op)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, dim in enumerate(shape):
        if dim == 1 and grad.shape[i] != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad


def _broadcast_check(op: str, a: GradNode, b: GradNode) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ContractViolation(
            f"{op}: incompatible shapes {a.shape} and {b.shape}",
            details={"op": op, "shapes": [list(a.shape), list(b.shape)]},
        )


def add(a, b) -> GradNode:
    a, b = as_node(a), as_node(b)
    _broadcast_check("add", a, b)

    def backward_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(a.value + b.value, (a, b), backward_fn, "add")


def sub(a, b) -> GradNode:
    a, b = as_node(a), as_node(b)
    _broadcast_check("sub", a, b)

    def backward_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(a.value - b.value, (a, b), backward_fn, "sub")


def mul(a, b) -> GradNode:
    a, b = as_node(a), as_node(b)
    _broadcast_check("mul", a, b)

    def backward_fn(g):
        return _unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)

    return _make(a.value * b.value, (a, b), backward_fn, "mul")


def div(a, b) -> GradNode:
    a, b = as_node(a), as_node(b)
    _broadcast_check("div", a, b)
    out = a.value / b.value

    def backward_fn(g):
        return (
            _unbroadcast(g / b.value, a.shape),
            _unbroadcast(-g * out / b.value, b.shape),
        )

    return _make(out, (a, b), backward_fn, "div")


def neg(a) -> GradNode:
    a = as_node(a)
    return _make(-a.value, (a,), lambda g: (-g,), "neg")


def matmul(a, b) -> GradNode:
    a, b = as_node(a), as_node(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ContractViolation(
            f"matmul: incompatible shapes {a.shape} and {b.shape}",
            details={"op": "matmul", "shapes": [list(a.shape), list(b.shape)]},
        )

    def backward_fn(g):
        return g @ b.value.T, a.value.T @ g

    return _make(a.value @ b.value, (a, b), backward_fn, "matmul")


def exp(a) -> GradNode:
    a = as_node(a)
    out = np.exp(a.value)
    return _make(out, (a,), lambda g: (g * out,), "exp")


def log(a) -> GradNode:
    a = as_node(a)
    with np.errstate(divide="ignore"):
        out = np.log(a.value)
    return _make(out, (a,), lambda g: (g / a.value,), "log")


def tanh(a) -> GradNode:
    a = as_node(a)
    out = np.tanh(a.value)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def sigmoid(a) -> GradNode:
    a = as_node(a)
    out = special.expit(a.value)
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def softplus(a) -> GradNode:
    a = as_node(a)
    out = np.logaddexp(0.0, a.value)
    return _make(out, (a,), lambda g: (g * special.expit(a.value),), "softplus")


def _expand(g: np.ndarray, shape: Tuple[int, ...], axis: Axis, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum(a, axis: Axis = None, keepdims: bool = False) -> GradNode:  # noqa: A001
    a = as_node(a)

    def backward_fn(g):
        return (np.array(_expand(g, a.shape, axis, keepdims)),)

    return _make(np.sum(a.value, axis=axis, keepdims=keepdims), (a,), backward_fn, "sum")


def mean(a, axis: Axis = None, keepdims: bool = False) -> GradNode:
    a = as_node(a)
    count = a.value.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])

    def backward_fn(g):
        return (np.array(_expand(g, a.shape, axis, keepdims)) / count,)

    return _make(np.mean(a.value, axis=axis, keepdims=keepdims), (a,), backward_fn, "mean")


def logsumexp(a, axis: int = -1, keepdims: bool = False) -> GradNode:
    """Stable log Σ exp(a) along ``axis`` via max-shift."""
    a = as_node(a)
    if a.ndim == 0 or a.shape[axis] == 0:
        raise ContractViolation(
            f"logsumexp over an empty axis (shape {a.shape}, axis {axis})",
            details={"op": "logsumexp", "shape": list(a.shape)},
        )
    out = special.logsumexp(a.value, axis=axis, keepdims=keepdims)

    def backward_fn(g):
        lse = out if keepdims else np.expand_dims(out, axis)
        gk = g if keepdims else np.expand_dims(g, axis)
        with np.errstate(invalid="ignore"):
            weights = np.exp(a.value - lse)
        return (gk * weights,)

    return _make(out, (a,), backward_fn, "logsumexp")


def log_softmax(a, axis: int = -1) -> GradNode:
    a = as_node(a)
    out = special.log_softmax(a.value, axis=axis)

    def backward_fn(g):
        return (g - np.exp(out) * np.sum(g, axis=axis, keepdims=True),)

    return _make(out, (a,), backward_fn, "log_softmax")


def softmax(a, axis: int = -1) -> GradNode:
    a = as_node(a)
    out = special.softmax(a.value, axis=axis)

    def backward_fn(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return _make(out, (a,), backward_fn, "softmax")


def concat(nodes: Sequence, axis: int = -1) -> GradNode:
    nodes = [as_node(n) for n in nodes]
    try:
        out = np.concatenate([n.value for n in nodes], axis=axis)
    except ValueError:
        raise ContractViolation(
            f"concat: incompatible shapes {[n.shape for n in nodes]}",
            details={"op": "concat", "shapes": [list(n.shape) for n in nodes]},
        )
    sizes = np.cumsum([n.shape[axis] for n in nodes])[:-1]

    def backward_fn(g):
        return tuple(np.split(g, sizes, axis=axis))

    return _make(out, nodes, backward_fn, "concat")


def reshape(a, shape: Tuple[int, ...]) -> GradNode:
    a = as_node(a)
    return _make(a.value.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")


def index(a, key) -> GradNode:
    """Differentiable ``a[key]`` for basic and integer-array indexing."""
    a = as_node(a)

    def backward_fn(g):
        grad = np.zeros_like(a.value)
        np.add.at(grad, key, g)
        return (grad,)

    return _make(a.value[key], (a,), backward_fn, "index")


def take_rows(table, rows: np.ndarray) -> GradNode:
    """Gather ``table[rows]`` along the first axis."""
    table = as_node(table)
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size and (rows.min() < 0 or rows.max() >= table.shape[0]):
        raise ContractViolation(
            f"take_rows: row index out of range [0, {table.shape[0]})",
            details={"op": "take_rows"},
        )

    def backward_fn(g):
        grad = np.zeros_like(table.value)
        np.add.at(grad, rows, g)
        return (grad,)

    return _make(table.value[rows], (table,), backward_fn, "take_rows")


def pick(a, choices: np.ndarray) -> GradNode:
    """Select ``a[..., choices]`` along the last axis, one entry per row."""
    a = as_node(a)
    choices = np.asarray(choices, dtype=np.int64)
    expanded = choices[..., None]
    out = np.take_along_axis(a.value, expanded, axis=-1)[..., 0]

    def backward_fn(g):
        grad = np.zeros_like(a.value)
        np.put_along_axis(grad, expanded, g[..., None], axis=-1)
        return (grad,)

    return _make(out, (a,), backward_fn, "pick")


def where(mask: np.ndarray, a, b) -> GradNode:
    """Elementwise select with a constant boolean mask."""
    a, b = as_node(a), as_node(b)
    mask = np.asarray(mask, dtype=bool)
    out = np.where(mask, a.value, b.value)

    def backward_fn(g):
        return (
            _unbroadcast(np.where(mask, g, 0.0), a.shape),
            _unbroadcast(np.where(mask, 0.0, g), b.shape),
        )

    return _make(out, (a, b), backward_fn, "where")


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    return np.eye(num_classes, dtype=np.float64)[labels]


GradNode.__add__ = add
GradNode.__radd__ = lambda self, other: add(other, self)
GradNode.__sub__ = sub
GradNode.__rsub__ = lambda self, other: sub(other, self)
GradNode.__mul__ = mul
GradNode.__rmul__ = lambda self, other: mul(other, self)
GradNode.__truediv__ = div
GradNode.__rtruediv__ = lambda self, other: div(other, self)
GradNode.__neg__ = neg
GradNode.__matmul__ = matmul
