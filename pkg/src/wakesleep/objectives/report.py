"""
Assemble the θ and φ losses of one batch for any training objective.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from wakesleep.base.exceptions import ConfigurationError
from wakesleep.core import GradNode, Rng, ops
from wakesleep.models.base import LatentVariableModel

logger = logging.getLogger(__name__)


@dataclass
class ObjectiveReport:
    """Losses to minimize plus scalar diagnostics; ``joint`` means both losses are one node."""

    loss_theta: GradNode
    loss_phi: GradNode
    diagnostics: Dict[str, float] = field(default_factory=dict)
    joint: bool = False


def _particle_diagnostics(pset, **terms: GradNode) -> Dict[str, float]:
    _, ess = pset.ssws_weights()
    diagnostics = {
        "ess_mean": float(np.mean(ess)),
        "log_weight_variance": float(np.mean(pset.weight_log_variance())),
        "n_supervised": float(np.sum(pset.n_supervised)),
        "n_unsupervised": float(np.sum(pset.n_unsupervised)),
    }
    diagnostics.update({name: node.item() for name, node in terms.items()})
    return diagnostics


def compute_report(
    model: LatentVariableModel,
    x: np.ndarray,
    labels: np.ndarray,
    objective: str,
    K: int,
    alpha: float,
    rng: Rng,
    ssws_term_scaling: str = "sum",
) -> ObjectiveReport:
    """
    Build the losses of ``objective`` for the batch (x [B, T, D], labels [B, T]).

    Wake-sleep objectives share one clamped particle set for every term:
    θ minimizes -L_p; φ minimizes L_q - α·L_s (ssws, iwae-supervised-baseline),
    L_q^CWS (cws) or L_q with labels ignored (rws). reinforce-m1m2 replaces the
    φ loss with a score-function surrogate; m1m2 uses one joint objective.
    """
    # m1m2 imports ObjectiveReport from this module
    from .bounds import loss_p
    from .m1m2 import m1m2_losses
    from .reinforce import reinforce_surrogate
    from .wake import loss_q_cws, loss_q_ssws, loss_s
    from wakesleep.particles import sample_particles

    labels = np.asarray(labels, dtype=np.int64)
    if objective == "m1m2":
        return m1m2_losses(model, x, labels, alpha, rng)
    if objective == "rws":
        labels = np.full_like(labels, -1)
    elif objective not in ("ssws", "cws", "iwae-supervised-baseline", "reinforce-m1m2"):
        raise ConfigurationError(f"Unknown objective '{objective}'")

    pset = sample_particles(model, x, labels, K, rng)
    bound = loss_p(pset)

    if objective == "reinforce-m1m2":
        loss_theta = -ops.mean(pset.log_p)
        loss_phi = reinforce_surrogate(pset, alpha)
        return ObjectiveReport(
            loss_theta=loss_theta,
            loss_phi=loss_phi,
            diagnostics=_particle_diagnostics(pset, loss_p=bound, loss_s=loss_s(pset)),
        )

    if objective == "cws":
        l_q = loss_q_cws(pset)
        return ObjectiveReport(
            loss_theta=-bound,
            loss_phi=l_q,
            diagnostics=_particle_diagnostics(pset, loss_p=bound, loss_q=l_q),
        )

    l_q = loss_q_ssws(pset, ssws_term_scaling)
    l_s = loss_s(pset, ssws_term_scaling)
    loss_phi = l_q - alpha * l_s if pset.log_q_sup is not None else l_q
    return ObjectiveReport(
        loss_theta=-bound,
        loss_phi=loss_phi,
        diagnostics=_particle_diagnostics(pset, loss_p=bound, loss_q=l_q, loss_s=l_s),
    )
