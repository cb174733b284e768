"""
Reverse-mode differentiation graph.

A GradNode carries a float64 value, the parents it was computed from and a
backward rule mapping the node's adjoint to one adjoint per parent. Leaves that
require gradients accumulate into ``grad`` on every backward pass; the trainer
zeroes them explicitly between updates.
"""

import logging
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from wakesleep.base.exceptions import ContractViolation, NumericFault

logger = logging.getLogger(__name__)

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]
GradientMap = Dict[str, np.ndarray]


class GradNode:
    """Node in the differentiation graph."""

    __slots__ = ("value", "grad", "parents", "backward_fn", "op", "name", "requires_grad")

    # numpy defers to the reflected operators instead of broadcasting over the node
    __array_ufunc__ = None

    def __init__(
        self,
        value,
        parents: Tuple["GradNode", ...] = (),
        backward_fn: Optional[BackwardFn] = None,
        op: str = "leaf",
        name: Optional[str] = None,
        requires_grad: bool = False,
    ):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents
        self.backward_fn = backward_fn
        self.op = op
        self.name = name
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.value) if requires_grad and not parents else None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def is_leaf(self) -> bool:
        return not self.parents

    def item(self) -> float:
        if self.value.size != 1:
            raise ContractViolation(f"item() on non-scalar node of shape {self.shape}")
        return float(self.value.reshape(()))

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad = np.zeros_like(self.value)

    def __repr__(self) -> str:
        label = self.name or self.op
        return f"GradNode({label}, shape={self.shape}, requires_grad={self.requires_grad})"


def parameter(value, name: str) -> GradNode:
    """Create a trainable leaf."""
    return GradNode(np.array(value, dtype=np.float64, copy=True), name=name, requires_grad=True)


def constant(value) -> GradNode:
    """Wrap a value that never receives gradients."""
    return GradNode(value, op="const")


def as_node(value) -> GradNode:
    return value if isinstance(value, GradNode) else constant(value)


def detach(node: GradNode) -> GradNode:
    return constant(as_node(node).value)


def zero_grads(nodes: Iterable[GradNode]) -> None:
    for node in nodes:
        node.zero_grad()


def _topological_order(root: GradNode) -> List[GradNode]:
    order: List[GradNode] = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def _leaf_key(node: GradNode) -> str:
    return node.name if node.name is not None else f"leaf_{id(node)}"


def backward(root: GradNode, params: Optional[Iterable[GradNode]] = None) -> GradientMap:
    """
    Back-propagate from a scalar root into every reachable leaf.

    Returns the gradient contributed by this pass, keyed by leaf name. Leaf
    ``grad`` attributes accumulate across calls. Every leaf in ``params`` gets
    an entry, all zeros when the root does not depend on it.
    """
    if root.value.size != 1:
        raise ContractViolation(
            f"backward() needs a scalar root, got shape {root.shape}",
            details={"shape": list(root.shape)},
        )
    if not root.is_leaf or not root.requires_grad:
        root.grad = np.ones_like(root.value)

    contributions = _sweep(root) if root.requires_grad else {}
    for leaf in params or ():
        contributions.setdefault(_leaf_key(leaf), np.zeros_like(leaf.value))
    return contributions


def _sweep(root: GradNode) -> GradientMap:
    adjoints: Dict[int, np.ndarray] = {id(root): np.ones_like(root.value)}
    contributions: GradientMap = {}
    for node in reversed(_topological_order(root)):
        g = adjoints.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            node.grad = node.grad + g
            key = _leaf_key(node)
            contributions[key] = contributions[key] + g if key in contributions else g.copy()
            continue
        for parent, parent_grad in zip(node.parents, node.backward_fn(g)):
            if parent_grad is None or not parent.requires_grad:
                continue
            if not np.all(np.isfinite(parent_grad)):
                logger.error(f"Non-finite gradient produced by backward rule of '{node.op}'")
                raise NumericFault(f"Non-finite gradient in backward of '{node.op}'", op=node.op)
            previous = adjoints.get(id(parent))
            adjoints[id(parent)] = parent_grad if previous is None else previous + parent_grad
    return contributions
