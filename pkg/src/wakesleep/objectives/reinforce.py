"""
Score-function (REINFORCE) gradient of the semi-supervised ELBO with a
leave-one-out baseline across the K particles of each sequence.
"""

import logging

import numpy as np

from wakesleep.base.exceptions import ContractViolation
from wakesleep.core import GradNode, GradientMap, Rng, backward, ops
from wakesleep.models.base import LatentVariableModel
from wakesleep.particles import ParticleSet, sample_particles

from .wake import loss_s

logger = logging.getLogger(__name__)


def leave_one_out_advantage(pset: ParticleSet) -> np.ndarray:
    """f_k - mean_{j≠k} f_j with f = log p - log q, per sequence."""
    if pset.K < 2:
        raise ContractViolation(f"The leave-one-out baseline needs K >= 2, got K={pset.K}")
    f = pset.log_w_ssws()
    baseline = (f.sum(axis=-1, keepdims=True) - f) / (pset.K - 1)
    return f - baseline


def reinforce_surrogate(pset: ParticleSet, alpha: float = 0.0) -> GradNode:
    """
    Scalar whose φ-gradient is the score-function estimate of -∇_φ ELBO,
    minus α·∇_φ L_s for the supervised term.
    """
    advantage = leave_one_out_advantage(pset).reshape(-1)
    surrogate = -ops.sum(pset.log_q_sampled * advantage) / (pset.K * pset.num_sequences)
    if alpha and pset.log_q_sup is not None:
        surrogate = surrogate - alpha * loss_s(pset)
    return surrogate


def reinforce_phi_grad(
    model: LatentVariableModel,
    x: np.ndarray,
    labels: np.ndarray,
    K: int,
    rng: Rng,
    alpha: float = 0.0,
) -> GradientMap:
    """Sample K particles per sequence and return the REINFORCE estimate of ∇_φ of the loss."""
    if K < 2:
        raise ContractViolation(f"reinforce_phi_grad needs K >= 2, got K={K}")
    pset = sample_particles(model, x, labels, K, rng)
    model.phi.zero_grad()
    grads = backward(reinforce_surrogate(pset, alpha))
    return {name: g for name, g in grads.items() if name.startswith("phi.")}
