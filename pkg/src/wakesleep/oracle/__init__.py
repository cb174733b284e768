"""
Brute-force references for testing the engine.

Depends on models and core only; never on particles, objectives or the trainer.
"""

from .enumeration import (
    ExactPosterior,
    exact_elbo,
    exact_elbo_phi_gradient,
    exact_kl_posterior_q,
    exact_log_marginal,
    exact_phi_gradient,
    exact_posterior,
    posterior_q_logits,
    toy_q_log_probs,
)
from .finite_diff import finite_difference_gradient, relative_error
from .hmm import ForwardBackward, backward_messages, forward, forward_backward, toy_hmm_parameters

__all__ = [
    "ExactPosterior",
    "ForwardBackward",
    "backward_messages",
    "exact_elbo",
    "exact_elbo_phi_gradient",
    "exact_kl_posterior_q",
    "exact_log_marginal",
    "exact_phi_gradient",
    "exact_posterior",
    "finite_difference_gradient",
    "forward",
    "forward_backward",
    "posterior_q_logits",
    "relative_error",
    "toy_hmm_parameters",
    "toy_q_log_probs",
]
