"""
φ losses of the wake-sleep family.

All of them share one particle set and enter the importance weights as
constants, so their gradients reach φ through log q only.
"""

import logging
from typing import Optional

import numpy as np

from wakesleep.core import GradNode, constant, ops
from wakesleep.particles import ParticleSet, cws_weights

logger = logging.getLogger(__name__)


def _weighted_nll(
    pset: ParticleSet, weights: np.ndarray, log_q: GradNode, scale: Optional[np.ndarray] = None
) -> GradNode:
    """Σ_k w_k·(-log q_k) per sequence, optionally rescaled per sequence, averaged over sequences."""
    coeff = np.asarray(weights, dtype=np.float64)
    if scale is not None:
        coeff = coeff * scale[:, None]
    per_row = -(log_q * coeff.reshape(-1))
    return ops.sum(per_row) / pset.num_sequences


def _term_scale(counts: np.ndarray) -> np.ndarray:
    return 1.0 / np.maximum(counts, 1)


def loss_q_ssws(pset: ParticleSet, scaling: str = "sum") -> GradNode:
    """Wake-φ loss Σ_k w̄_k·(-log q(y_U, z | ·)); ``scaling="normalized"`` divides by |U|."""
    weights, _ = pset.ssws_weights()
    scale = _term_scale(pset.n_unsupervised) if scaling == "normalized" else None
    return _weighted_nll(pset, weights, pset.log_q_sampled, scale)


def loss_s(pset: ParticleSet, scaling: str = "sum") -> GradNode:
    """(1/K)·Σ_k Σ_{t∈S} log q(y_t | ·); zero when nothing is supervised. Maximized in φ."""
    if pset.log_q_sup is None:
        return constant(0.0)
    per_sequence = ops.mean(ops.reshape(pset.log_q_sup, (pset.num_sequences, pset.K)), axis=-1)
    if scaling == "normalized":
        per_sequence = per_sequence * _term_scale(pset.n_supervised)
    return ops.mean(per_sequence)


def loss_q_cws(pset: ParticleSet) -> GradNode:
    """Unified φ loss Σ_k w̃_k·(-log q(y_U, y_S, z | ·)) with labels clamped into each particle."""
    return _weighted_nll(pset, cws_weights(pset), pset.log_q_full)
