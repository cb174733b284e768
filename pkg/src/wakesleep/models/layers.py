"""
Parameter containers and the small layer library the models are built from.
"""

import logging
from collections import OrderedDict
from typing import Dict, Iterator, Optional, Sequence

import numpy as np

from wakesleep.base.exceptions import CheckpointError
from wakesleep.core import GradNode, Rng, ops, parameter

logger = logging.getLogger(__name__)


class ParameterSet:
    """Ordered, named collection of trainable leaves sharing a prefix (``theta`` or ``phi``)."""

    def __init__(self, prefix: str):
        self.prefix = prefix
        self._params: "OrderedDict[str, GradNode]" = OrderedDict()

    def create(self, name: str, value: np.ndarray) -> GradNode:
        full_name = f"{self.prefix}.{name}"
        if full_name in self._params:
            raise ValueError(f"Duplicate parameter name {full_name}")
        node = parameter(value, full_name)
        self._params[full_name] = node
        return node

    def __getitem__(self, name: str) -> GradNode:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[GradNode]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self):
        return list(self._params.keys())

    def zero_grad(self) -> None:
        for node in self._params.values():
            node.zero_grad()

    def state(self) -> Dict[str, np.ndarray]:
        return {name: node.value.copy() for name, node in self._params.items()}

    def load(self, state: Dict[str, np.ndarray]) -> None:
        for name, node in self._params.items():
            if name not in state:
                raise CheckpointError(f"Missing tensor '{name}'", details={"tensor": name})
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != node.value.shape:
                raise CheckpointError(
                    f"Tensor '{name}' has shape {value.shape}, model expects {node.value.shape}",
                    details={"tensor": name, "found": list(value.shape), "expected": list(node.value.shape)},
                )
            node.value = value.copy()
            node.zero_grad()


def fan_in_uniform(rng: Optional[Rng], shape: Sequence[int], fan_in: int) -> np.ndarray:
    """U(-1/sqrt(fan_in), 1/sqrt(fan_in)); zeros when no rng is given."""
    if rng is None:
        return np.zeros(shape)
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return (2.0 * rng.uniform(shape) - 1.0) * bound


class Linear:
    def __init__(self, params: ParameterSet, name: str, in_dim: int, out_dim: int, rng: Optional[Rng]):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = params.create(f"{name}.weight", fan_in_uniform(rng, (in_dim, out_dim), in_dim))
        self.bias = params.create(f"{name}.bias", np.zeros(out_dim))

    def __call__(self, x) -> GradNode:
        return ops.matmul(x, self.weight) + self.bias


class GRUCell:
    """Gated recurrent cell with update and reset gates."""

    def __init__(self, params: ParameterSet, name: str, input_dim: int, hidden_dim: int, rng: Optional[Rng]):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.x_reset = Linear(params, f"{name}.x_reset", input_dim, hidden_dim, rng)
        self.x_update = Linear(params, f"{name}.x_update", input_dim, hidden_dim, rng)
        self.x_new = Linear(params, f"{name}.x_new", input_dim, hidden_dim, rng)
        self.h_reset = Linear(params, f"{name}.h_reset", hidden_dim, hidden_dim, rng)
        self.h_update = Linear(params, f"{name}.h_update", hidden_dim, hidden_dim, rng)
        self.h_new = Linear(params, f"{name}.h_new", hidden_dim, hidden_dim, rng)

    def __call__(self, x, h) -> GradNode:
        reset = ops.sigmoid(self.x_reset(x) + self.h_reset(h))
        update = ops.sigmoid(self.x_update(x) + self.h_update(h))
        candidate = ops.tanh(self.x_new(x) + reset * self.h_new(h))
        return (1.0 - update) * candidate + update * h


class MLP:
    """One softplus hidden layer followed by one linear read-out per head."""

    def __init__(
        self,
        params: ParameterSet,
        name: str,
        in_dim: int,
        hidden_dim: int,
        heads: Dict[str, int],
        rng: Optional[Rng],
    ):
        self.hidden = Linear(params, f"{name}.hidden", in_dim, hidden_dim, rng)
        self.heads = {
            head: Linear(params, f"{name}.{head}", hidden_dim, out_dim, rng)
            for head, out_dim in heads.items()
        }

    def __call__(self, x) -> Dict[str, GradNode]:
        features = ops.softplus(self.hidden(x))
        return {head: layer(features) for head, layer in self.heads.items()}
