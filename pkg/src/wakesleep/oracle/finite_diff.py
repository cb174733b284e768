"""
Central finite differences against a single parameter leaf.
"""

from typing import Callable

import numpy as np

from wakesleep.base.exceptions import ContractViolation
from wakesleep.core import GradNode


def finite_difference_gradient(fn: Callable[[], float], leaf: GradNode, h: float = 1e-6) -> np.ndarray:
    """
    d fn / d leaf by central differences, one element at a time.

    ``fn`` is re-evaluated with ``leaf.value`` perturbed in place; the
    original value is restored afterwards even if ``fn`` raises.
    """
    if h <= 0:
        raise ContractViolation(f"Step size must be positive, got {h}")
    original = leaf.value.copy()
    grad = np.zeros_like(original)
    try:
        for index in np.ndindex(original.shape):
            leaf.value = original.copy()
            leaf.value[index] += h
            upper = float(fn())
            leaf.value = original.copy()
            leaf.value[index] -= h
            lower = float(fn())
            grad[index] = (upper - lower) / (2.0 * h)
    finally:
        leaf.value = original
    return grad


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> float:
    """max |a - b| / max(|a|, |b|, floor), elementwise."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / scale)) if a.size else 0.0
