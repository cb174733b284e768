"""
Categorical distribution over {0, ..., C-1}, batched over leading axes.
"""

import numpy as np

from wakesleep.base.exceptions import ContractViolation
from wakesleep.core import GradNode, Rng, as_node, ops


class Categorical:
    """
    Categorical parameterized by unnormalized logits of shape ``[..., C]``.

    Sampling uses Gumbel-argmax and has no pathwise gradient; gradients reach
    the logits only through ``log_prob``.
    """

    def __init__(self, logits):
        self.logits = as_node(logits)
        if self.logits.ndim == 0 or self.logits.shape[-1] < 2:
            raise ContractViolation(
                f"Categorical needs at least 2 classes, got logits shape {self.logits.shape}"
            )
        self._log_probs = None

    @property
    def num_classes(self) -> int:
        return self.logits.shape[-1]

    @property
    def batch_shape(self):
        return self.logits.shape[:-1]

    @property
    def log_probs(self) -> GradNode:
        if self._log_probs is None:
            self._log_probs = ops.log_softmax(self.logits, axis=-1)
        return self._log_probs

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs.value)

    def _check_value(self, value: np.ndarray) -> np.ndarray:
        value = np.asarray(value)
        if value.shape != self.batch_shape:
            raise ContractViolation(
                f"Categorical value shape {value.shape} does not match batch shape {self.batch_shape}"
            )
        if value.size and (value.min() < 0 or value.max() >= self.num_classes):
            raise ContractViolation(
                f"Categorical value out of range [0, {self.num_classes})",
                details={"min": int(value.min()), "max": int(value.max())},
            )
        return value.astype(np.int64)

    def log_prob(self, value) -> GradNode:
        return ops.pick(self.log_probs, self._check_value(value))

    def sample(self, rng: Rng = None, noise: np.ndarray = None) -> np.ndarray:
        """Gumbel-argmax draw; ``noise`` supplies pre-drawn Gumbel variates."""
        if noise is None:
            if rng is None:
                raise ContractViolation("Categorical.sample needs an rng or pre-drawn noise")
            noise = rng.gumbel(self.logits.shape)
        return np.argmax(self.logits.value + noise, axis=-1)

    def mode(self) -> np.ndarray:
        return np.argmax(self.logits.value, axis=-1)

    def entropy(self) -> GradNode:
        lp = self.log_probs
        finite = np.isfinite(lp.value)
        return -ops.sum(ops.exp(lp) * ops.where(finite, lp, 0.0), axis=-1)

    @classmethod
    def uniform(cls, batch_shape, num_classes: int) -> "Categorical":
        return cls(np.zeros(tuple(batch_shape) + (num_classes,)))


def kl_categorical(q: Categorical, p: Categorical) -> GradNode:
    """KL(q || p) = Σ q_i (ln q_i - ln p_i) per batch entry."""
    if q.num_classes != p.num_classes:
        raise ContractViolation(
            f"kl_categorical: class counts differ ({q.num_classes} vs {p.num_classes})"
        )
    support = q.probs > 0.0
    with np.errstate(invalid="ignore"):
        diff = ops.where(support, q.log_probs - p.log_probs, 0.0)
    return ops.sum(ops.exp(q.log_probs) * diff, axis=-1)
