"""
Forward and forward-backward recursions for discrete HMMs in log space.

Supervised steps are handled by masking the likelihood of every state but the
observed one, so the marginal becomes log p(x, y_S).
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import special

from wakesleep.base.exceptions import ContractViolation
from wakesleep.models.toy import EnumerableToy

logger = logging.getLogger(__name__)


@dataclass
class ForwardBackward:
    log_marginal: float
    log_alpha: np.ndarray
    log_beta: np.ndarray

    @property
    def marginals(self) -> np.ndarray:
        """p(y_t | x, y_S), shape [T, C]."""
        return np.exp(self.log_alpha + self.log_beta - self.log_marginal)


def _masked_log_lik(log_lik: np.ndarray, labels: Optional[np.ndarray]) -> np.ndarray:
    log_lik = np.asarray(log_lik, dtype=np.float64)
    if labels is None:
        return log_lik
    labels = np.asarray(labels, dtype=np.int64)
    length, num_states = log_lik.shape
    if labels.shape != (length,):
        raise ContractViolation(f"labels shape {labels.shape} != ({length},)")
    if labels.max(initial=-1) >= num_states or labels.min(initial=-1) < -1:
        raise ContractViolation(f"labels must lie in [-1, {num_states})")
    mask = np.zeros_like(log_lik)
    for t in np.flatnonzero(labels >= 0):
        mask[t] = -np.inf
        mask[t, labels[t]] = 0.0
    return log_lik + mask


def forward(
    log_init: np.ndarray, log_trans: np.ndarray, log_lik: np.ndarray, labels: Optional[np.ndarray] = None
) -> Tuple[float, np.ndarray]:
    """log p(x, y_S) and the forward messages log α_t(c) = log p(x_{≤t}, y_S∩≤t, y_t = c)."""
    log_lik = _masked_log_lik(log_lik, labels)
    length = log_lik.shape[0]
    log_alpha = np.empty_like(log_lik)
    log_alpha[0] = log_init + log_lik[0]
    for t in range(1, length):
        log_alpha[t] = special.logsumexp(log_alpha[t - 1][:, None] + log_trans, axis=0) + log_lik[t]
    return float(special.logsumexp(log_alpha[-1])), log_alpha


def backward_messages(log_trans: np.ndarray, log_lik: np.ndarray, labels: Optional[np.ndarray] = None) -> np.ndarray:
    """log β_t(c) = log p(x_{>t}, y_S∩>t | y_t = c)."""
    log_lik = _masked_log_lik(log_lik, labels)
    length = log_lik.shape[0]
    log_beta = np.zeros_like(log_lik)
    for t in range(length - 2, -1, -1):
        log_beta[t] = special.logsumexp(log_trans + (log_lik[t + 1] + log_beta[t + 1])[None, :], axis=1)
    return log_beta


def forward_backward(
    log_init: np.ndarray, log_trans: np.ndarray, log_lik: np.ndarray, labels: Optional[np.ndarray] = None
) -> ForwardBackward:
    log_marginal, log_alpha = forward(log_init, log_trans, log_lik, labels)
    log_beta = backward_messages(log_trans, log_lik, labels)
    return ForwardBackward(log_marginal=log_marginal, log_alpha=log_alpha, log_beta=log_beta)


def toy_hmm_parameters(toy: EnumerableToy, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(log_init, log_trans, log_lik [T, C]) of the toy's generative model for one symbol sequence."""
    symbols = toy.observe(np.asarray(x, dtype=np.float64).reshape(-1, 1))
    log_init = special.log_softmax(toy.init_logits.value)
    log_trans = special.log_softmax(toy.trans_logits.value, axis=-1)
    log_emit = special.log_softmax(toy.emit_logits.value, axis=-1)
    return log_init, log_trans, log_emit[:, symbols].T
