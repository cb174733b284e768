"""
The M1+M2 semi-supervised objective for single-step models.
"""

import logging
from typing import Optional

import numpy as np

from wakesleep.base.exceptions import ContractViolation
from wakesleep.core import GradNode, Rng, ops
from wakesleep.models.base import LatentVariableModel

from .bounds import marginal_terms
from .report import ObjectiveReport

logger = logging.getLogger(__name__)


def m1m2_objective(
    model: LatentVariableModel,
    x: np.ndarray,
    labels: np.ndarray,
    alpha: float,
    rng: Optional[Rng] = None,
) -> GradNode:
    """Σ_labeled [ELBO(x, y) + α·log q(y|x)] + Σ_unlabeled ELBO(x), divided by the batch size. Maximized."""
    if alpha < 0:
        raise ContractViolation(f"alpha must be >= 0, got {alpha}")
    terms = marginal_terms(model, x, labels, rng)
    n_rows = terms.labeled_rows.size + terms.unlabeled_rows.size
    total = None
    if terms.labeled_elbo is not None:
        total = ops.sum(terms.labeled_elbo + alpha * terms.labeled_log_q_y)
    if terms.unlabeled_elbo is not None:
        unlabeled = ops.sum(terms.unlabeled_elbo)
        total = unlabeled if total is None else total + unlabeled
    return total / n_rows


def m1m2_losses(
    model: LatentVariableModel,
    x: np.ndarray,
    labels: np.ndarray,
    alpha: float,
    rng: Optional[Rng] = None,
) -> ObjectiveReport:
    """One objective for θ and φ together: both losses are the same node."""
    if model.KIND not in ("static", "toy"):
        raise ContractViolation(f"M1+M2 enumerates y per example and needs a single-step model, got {model.KIND}")
    labels = np.asarray(labels, dtype=np.int64)
    objective = m1m2_objective(model, x, labels, alpha, rng)
    loss = -objective
    n_sup = int(np.sum(labels >= 0))
    return ObjectiveReport(
        loss_theta=loss,
        loss_phi=loss,
        joint=True,
        diagnostics={
            "objective": objective.item(),
            "n_supervised": float(n_sup),
            "n_unsupervised": float(labels.size - n_sup),
        },
    )
