"""
Dense float64 tensors with reverse-mode gradients.
"""

from . import ops
from .graph import GradNode, GradientMap, as_node, backward, constant, detach, parameter, zero_grads
from .random import Rng

__all__ = [
    "GradNode",
    "GradientMap",
    "Rng",
    "as_node",
    "backward",
    "constant",
    "detach",
    "ops",
    "parameter",
    "zero_grads",
]
