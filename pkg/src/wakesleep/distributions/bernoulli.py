"""
Independent Bernoulli vector for binarized observations.
"""

import numpy as np
from scipy import special

from wakesleep.base.exceptions import ContractViolation
from wakesleep.core import GradNode, Rng, as_node, ops


class BernoulliVec:
    def __init__(self, logits):
        self.logits = as_node(logits)

    @property
    def probs(self) -> np.ndarray:
        return special.expit(self.logits.value)

    def log_prob(self, value) -> GradNode:
        value = np.asarray(value, dtype=np.float64)
        if value.shape != self.logits.shape:
            raise ContractViolation(
                f"BernoulliVec value shape {value.shape} does not match {self.logits.shape}"
            )
        # log σ(l)^v (1-σ(l))^(1-v) = v·l - softplus(l)
        return ops.sum(self.logits * value - ops.softplus(self.logits), axis=-1)

    def sample(self, rng: Rng = None, noise: np.ndarray = None) -> np.ndarray:
        if noise is None:
            if rng is None:
                raise ContractViolation("BernoulliVec.sample needs an rng or pre-drawn noise")
            noise = rng.uniform(self.logits.shape)
        return (noise < self.probs).astype(np.float64)

    def mode(self) -> np.ndarray:
        return (self.logits.value > 0.0).astype(np.float64)
