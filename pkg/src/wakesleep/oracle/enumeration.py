"""
Exact references computed by enumerating every latent configuration of an
EnumerableToy for one observed sequence.

Nothing here samples: marginals, posteriors, KL divergences and φ-gradients
are weighted sums over the full table.
"""

import logging
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, Optional, Tuple

import numpy as np
from scipy import special

from wakesleep.base.exceptions import ContractViolation
from wakesleep.core import GradientMap, backward, constant, ops
from wakesleep.models.toy import EnumerableToy

from .hmm import backward_messages, toy_hmm_parameters

logger = logging.getLogger(__name__)

# log q(config) for each row of an int config array
QEval = Callable[[np.ndarray], np.ndarray]

POSTERIOR_TOLERANCE = 1e-12


def _sequence(toy: EnumerableToy, x: np.ndarray, labels: Optional[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64).reshape(-1, 1)
    if labels is None:
        labels = np.full(x.shape[0], -1, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != x.shape[0]:
        raise ContractViolation(f"x has {x.shape[0]} steps but labels has {labels.shape[0]}")
    return x, labels


@dataclass
class ExactPosterior:
    """p_θ(y_U | x, y_S) over every configuration consistent with y_S."""

    configs: np.ndarray
    probs: np.ndarray
    log_marginal: float

    def __post_init__(self):
        total = float(np.sum(self.probs))
        if abs(total - 1.0) > POSTERIOR_TOLERANCE * max(1, self.probs.size):
            raise ContractViolation(f"Posterior table sums to {total!r}")

    @property
    def table(self) -> Dict[Tuple[int, ...], float]:
        return {tuple(int(v) for v in config): float(p) for config, p in zip(self.configs, self.probs)}

    def entropy(self) -> float:
        positive = self.probs > 0
        return float(-np.sum(self.probs[positive] * np.log(self.probs[positive])))


def _log_joint_table(toy: EnumerableToy, x: np.ndarray, labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Every consistent configuration and its log p_θ(config, x), read off the CPTs."""
    configs = toy.enumerate_configs(labels)
    log_init, log_trans, log_lik = toy_hmm_parameters(toy, x)
    steps = np.arange(configs.shape[1])
    log_joint = log_init[configs[:, 0]] + np.sum(log_lik[steps, configs], axis=1)
    log_joint = log_joint + np.sum(log_trans[configs[:, :-1], configs[:, 1:]], axis=1)
    return configs, log_joint


def exact_posterior(toy: EnumerableToy, x: np.ndarray, labels: Optional[np.ndarray] = None) -> ExactPosterior:
    x, labels = _sequence(toy, x, labels)
    configs, log_joint = _log_joint_table(toy, x, labels)
    log_marginal = float(special.logsumexp(log_joint))
    return ExactPosterior(configs=configs, probs=np.exp(log_joint - log_marginal), log_marginal=log_marginal)


def exact_log_marginal(toy: EnumerableToy, x: np.ndarray, labels: Optional[np.ndarray] = None) -> float:
    """log p_θ(x, y_S) as a logsumexp over the whole configuration table."""
    x, labels = _sequence(toy, x, labels)
    return float(special.logsumexp(_log_joint_table(toy, x, labels)[1]))


def _q_trace(toy: EnumerableToy, x: np.ndarray, labels: np.ndarray, configs: np.ndarray):
    n_configs = configs.shape[0]
    return toy.trace(
        np.broadcast_to(x, (n_configs,) + x.shape),
        np.tile(labels, (n_configs, 1)),
        draw_y=lambda q_y, t: configs[:, t],
    )


def toy_q_log_probs(toy: EnumerableToy, x: np.ndarray, labels: np.ndarray, configs: np.ndarray) -> np.ndarray:
    """log q_φ(y_U | x, y_S) of the toy's own inference table at each configuration."""
    x, labels = _sequence(toy, x, labels)
    return _q_trace(toy, x, labels, configs).log_q_sampled.value.copy()


def exact_kl_posterior_q(
    toy: EnumerableToy,
    x: np.ndarray,
    labels: Optional[np.ndarray] = None,
    q_eval: Optional[QEval] = None,
) -> float:
    """
    KL(p(·|x, y_S) ‖ q) by direct summation. ``q_eval`` defaults to the toy's
    own q_φ; returns +inf when q puts no mass on a configuration p supports.
    """
    x, labels = _sequence(toy, x, labels)
    posterior = exact_posterior(toy, x, labels)
    if q_eval is None:
        log_q = toy_q_log_probs(toy, x, labels, posterior.configs)
    else:
        log_q = np.asarray(q_eval(posterior.configs), dtype=np.float64)
    support = posterior.probs > 0
    if np.any(np.isneginf(log_q[support])):
        logger.warning("q assigns zero mass to a configuration with positive posterior mass; KL is +inf")
        return float("inf")
    log_p = np.log(posterior.probs[support])
    return float(np.sum(posterior.probs[support] * (log_p - log_q[support])))


def _phi_only(grads: GradientMap) -> GradientMap:
    return {name: g for name, g in grads.items() if name.startswith("phi.")}


@contextmanager
def _preserved_grads(toy: EnumerableToy) -> Iterator[None]:
    """Leave every parameter's accumulated ``grad`` as the caller had it."""
    saved = [(node, node.grad.copy()) for node in toy.parameters().values()]
    try:
        yield
    finally:
        for node, grad in saved:
            node.grad = grad


def exact_phi_gradient(
    toy: EnumerableToy,
    x: np.ndarray,
    labels: Optional[np.ndarray] = None,
    include_supervised: bool = False,
) -> GradientMap:
    """
    E_{p(·|x, y_S)}[-∇_φ log q_φ(y_U | x, y_S)], the wake-φ target.

    With ``include_supervised`` the clamped labels' log q(y_S) is part of the
    differentiated log-density, matching the unified CWS loss.
    """
    x, labels = _sequence(toy, x, labels)
    posterior = exact_posterior(toy, x, labels)
    trace = _q_trace(toy, x, labels, posterior.configs)
    log_q = trace.log_q_full if include_supervised else trace.log_q_sampled
    target = -ops.sum(log_q * posterior.probs)
    with _preserved_grads(toy):
        grads = _phi_only(backward(target, toy.phi))
    return grads


def exact_elbo(toy: EnumerableToy, x: np.ndarray, labels: Optional[np.ndarray] = None) -> float:
    """Σ_config q(config)·(log p(config, x, y_S) - log q(config))."""
    x, labels = _sequence(toy, x, labels)
    configs = toy.enumerate_configs(labels)
    trace = _q_trace(toy, x, labels, configs)
    log_q = trace.log_q_sampled.value
    return float(np.sum(np.exp(log_q) * (trace.log_p.value - log_q)))


def exact_elbo_phi_gradient(toy: EnumerableToy, x: np.ndarray, labels: Optional[np.ndarray] = None) -> GradientMap:
    """∇_φ of :func:`exact_elbo`; score-function estimators of -ELBO target its negation."""
    x, labels = _sequence(toy, x, labels)
    configs = toy.enumerate_configs(labels)
    trace = _q_trace(toy, x, labels, configs)
    log_q = trace.log_q_sampled
    elbo = ops.sum(ops.exp(log_q) * (constant(trace.log_p.value) - log_q))
    with _preserved_grads(toy):
        grads = _phi_only(backward(elbo, toy.phi))
    return grads


def posterior_q_logits(toy: EnumerableToy, x: np.ndarray, labels: Optional[np.ndarray] = None) -> np.ndarray:
    """
    q logits under which the toy's q_φ(y_U | x, y_S) equals the exact posterior.

    The posterior of an HMM given x and y_S is Markov, so each free step gets
    p(y_t | y_{t-1}, x, y_S) ∝ trans·lik·β. Supervised steps keep zero logits.
    """
    x, labels = _sequence(toy, x, labels)
    length = x.shape[0]
    if length > toy.max_length:
        raise ContractViolation(f"Sequence length {length} exceeds the toy's max_length {toy.max_length}")
    log_init, log_trans, log_lik = toy_hmm_parameters(toy, x)
    log_beta = backward_messages(log_trans, log_lik, labels)
    logits = np.zeros(toy.q_logits.shape)
    start = toy.num_classes
    for t in range(length):
        if labels[t] >= 0:
            continue
        future = log_lik[t] + log_beta[t]
        if t == 0:
            logits[t, start] = log_init + future
        else:
            logits[t, :start] = log_trans + future[None, :]
        logits[t] = logits[t] - special.logsumexp(logits[t], axis=-1, keepdims=True)
    return logits
