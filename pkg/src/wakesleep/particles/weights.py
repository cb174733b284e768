"""
Self-normalized importance weights and effective sample size.
"""

from typing import Tuple

import numpy as np
from scipy import special

from wakesleep.base.exceptions import ContractViolation, DegenerateWeightsError, NumericFault


def normalize_weights(log_w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Normalize log-weights along the last axis.

    Returns ``(w, ess)`` with w = exp(log_w - logsumexp(log_w)) and
    ess = 1 / Σ w². Leading axes are independent particle sets.
    """
    log_w = np.asarray(log_w, dtype=np.float64)
    if log_w.ndim == 0 or log_w.shape[-1] < 1:
        raise ContractViolation(f"normalize_weights needs at least one particle, got shape {log_w.shape}")
    if np.isnan(log_w).any() or np.isposinf(log_w).any():
        raise NumericFault("Log-weights contain NaN or +inf", op="normalize_weights")
    dead = np.all(np.isneginf(log_w), axis=-1)
    if dead.any():
        raise DegenerateWeightsError(
            "All log-weights of a particle set are -inf",
            details={"sets": np.flatnonzero(dead.reshape(-1)).tolist()},
        )
    lse = special.logsumexp(log_w, axis=-1, keepdims=True)
    w = np.exp(log_w - lse)
    ess = 1.0 / np.sum(w * w, axis=-1)
    return w, ess


def log_weight_variance(log_w: np.ndarray) -> np.ndarray:
    """Variance of the log-weights within each particle set."""
    return np.var(np.asarray(log_w, dtype=np.float64), axis=-1)
