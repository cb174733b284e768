"""
Adam and global-norm gradient clipping over GradNode leaves.
"""

import logging
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from wakesleep.base.exceptions import CheckpointError, NumericFault
from wakesleep.core import GradNode

logger = logging.getLogger(__name__)


def grad_norm(params: Iterable[GradNode]) -> float:
    total = 0.0
    for node in params:
        if node.grad is not None:
            total += float(np.sum(node.grad * node.grad))
    return float(np.sqrt(total))


def clip_grad_norm(params: Sequence[GradNode], max_norm: float) -> Tuple[float, bool]:
    """Rescale gradients in place so their global norm is at most ``max_norm``."""
    norm = grad_norm(params)
    if not np.isfinite(norm):
        raise NumericFault("Non-finite gradient norm", op="clip_grad_norm")
    if max_norm is None or norm <= max_norm:
        return norm, False
    factor = max_norm / norm
    for node in params:
        if node.grad is not None:
            node.grad = node.grad * factor
    return norm, True


class Adam:
    """Adam with bias correction; descends on the accumulated ``grad`` of each leaf."""

    def __init__(
        self,
        params: Sequence[GradNode],
        lr: float = 1e-3,
        betas: Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.params: List[GradNode] = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m: Dict[str, np.ndarray] = {p.name: np.zeros_like(p.value) for p in self.params}
        self.v: Dict[str, np.ndarray] = {p.name: np.zeros_like(p.value) for p in self.params}

    def step(self) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for node in self.params:
            if node.grad is None:
                continue
            m = self.m[node.name] = self.beta1 * self.m[node.name] + (1.0 - self.beta1) * node.grad
            v = self.v[node.name] = self.beta2 * self.v[node.name] + (1.0 - self.beta2) * node.grad**2
            node.value = node.value - self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)

    def zero_grad(self) -> None:
        for node in self.params:
            node.zero_grad()

    def state_dict(self, prefix: str) -> Dict[str, np.ndarray]:
        state = {f"{prefix}.step": np.array(self.t, dtype=np.int64)}
        for name in self.m:
            state[f"{prefix}.m.{name}"] = self.m[name].copy()
            state[f"{prefix}.v.{name}"] = self.v[name].copy()
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray], prefix: str) -> None:
        try:
            self.t = int(state[f"{prefix}.step"])
            for name in self.m:
                m = np.asarray(state[f"{prefix}.m.{name}"], dtype=np.float64)
                v = np.asarray(state[f"{prefix}.v.{name}"], dtype=np.float64)
                if m.shape != self.m[name].shape or v.shape != self.v[name].shape:
                    raise CheckpointError(
                        f"Optimizer moment for '{name}' has shape {m.shape}, expected {self.m[name].shape}",
                        details={"tensor": name},
                    )
                self.m[name], self.v[name] = m.copy(), v.copy()
        except KeyError as e:
            raise CheckpointError(f"Optimizer state missing {e}", details={"tensor": str(e)})
