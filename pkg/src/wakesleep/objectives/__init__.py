"""
Training losses: evidence bounds, wake-sleep φ losses, M1+M2 and REINFORCE.
"""

from .bounds import MarginalTerms, elbo, loss_p, marginal_terms
from .m1m2 import m1m2_losses, m1m2_objective
from .reinforce import leave_one_out_advantage, reinforce_phi_grad, reinforce_surrogate
from .report import ObjectiveReport, compute_report
from .wake import loss_q_cws, loss_q_ssws, loss_s

__all__ = [
    "MarginalTerms",
    "ObjectiveReport",
    "compute_report",
    "elbo",
    "leave_one_out_advantage",
    "loss_p",
    "loss_q_cws",
    "loss_q_ssws",
    "loss_s",
    "m1m2_losses",
    "m1m2_objective",
    "marginal_terms",
    "reinforce_phi_grad",
    "reinforce_surrogate",
]
