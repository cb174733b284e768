"""
Diagonal Gaussian parameterized by mean and log standard deviation.
"""

import math

import numpy as np

from wakesleep.base.exceptions import ContractViolation
from wakesleep.core import GradNode, Rng, as_node, ops

_HALF_LOG_TWO_PI = 0.5 * math.log(2.0 * math.pi)


class DiagGaussian:
    """Independent normals over the last axis; densities are evaluated in log space only."""

    def __init__(self, mean, log_std):
        self.mean = as_node(mean)
        self.log_std = as_node(log_std)
        if self.mean.shape != self.log_std.shape:
            raise ContractViolation(
                f"DiagGaussian mean shape {self.mean.shape} != log_std shape {self.log_std.shape}"
            )
        if not np.all(np.isfinite(self.log_std.value)):
            raise ContractViolation("DiagGaussian log_std must be finite")

    @property
    def event_dim(self) -> int:
        return self.mean.shape[-1]

    def log_prob(self, value) -> GradNode:
        value = as_node(value)
        if value.shape != self.mean.shape:
            raise ContractViolation(
                f"DiagGaussian value shape {value.shape} does not match {self.mean.shape}"
            )
        scaled = (value - self.mean) * ops.exp(-self.log_std)
        per_dim = -0.5 * (scaled * scaled) - self.log_std - _HALF_LOG_TWO_PI
        return ops.sum(per_dim, axis=-1)

    def _noise(self, rng: Rng, noise: np.ndarray) -> np.ndarray:
        if noise is None:
            if rng is None:
                raise ContractViolation("DiagGaussian sampling needs an rng or pre-drawn noise")
            noise = rng.normal(self.mean.shape)
        return np.asarray(noise, dtype=np.float64)

    def sample(self, rng: Rng = None, noise: np.ndarray = None) -> np.ndarray:
        eps = self._noise(rng, noise)
        return self.mean.value + np.exp(self.log_std.value) * eps

    def rsample(self, rng: Rng = None, noise: np.ndarray = None) -> GradNode:
        """Reparameterized draw mean + exp(log_std)·ε; differentiable in both parameters."""
        eps = self._noise(rng, noise)
        return self.mean + ops.exp(self.log_std) * eps

    @classmethod
    def standard(cls, shape) -> "DiagGaussian":
        return cls(np.zeros(shape), np.zeros(shape))
