"""
Evidence bounds: the single-sample ELBO, its class-marginalized form for
single-step models, and the K-particle IWAE bound that drives θ.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from wakesleep.base.exceptions import ContractViolation
from wakesleep.core import GradNode, Rng, detach, ops
from wakesleep.models.base import LatentVariableModel
from wakesleep.particles import ParticleSet, normalize_weights

logger = logging.getLogger(__name__)


def loss_p(pset: ParticleSet) -> GradNode:
    """
    IWAE bound logsumexp_k(log p - log q) - ln K, averaged over sequences.

    log q enters as a constant, so the gradient reaches θ through log p only.
    """
    normalize_weights(pset.log_w_ssws())
    log_w = pset.log_p - detach(pset.log_q_sampled)
    per_sequence = ops.reshape(log_w, (pset.num_sequences, pset.K))
    bound = ops.logsumexp(per_sequence, axis=-1) - math.log(pset.K)
    return ops.mean(bound)


@dataclass
class MarginalTerms:
    """Per-row pieces of the M1+M2 objective for single-step data."""

    labeled_elbo: Optional[GradNode]
    labeled_log_q_y: Optional[GradNode]
    unlabeled_elbo: Optional[GradNode]
    labeled_rows: np.ndarray
    unlabeled_rows: np.ndarray


def _single_step_noise(rng: Optional[Rng], rows: int, z_dim: int) -> Optional[np.ndarray]:
    if z_dim == 0:
        return None
    if rng is None:
        return np.zeros((rows, 1, z_dim))
    return rng.normal((rows, 1, z_dim))


def marginal_terms(
    model: LatentVariableModel, x: np.ndarray, labels: np.ndarray, rng: Optional[Rng] = None
) -> MarginalTerms:
    """
    Labeled rows: log p(x, y, z) - log q(z | x, y) with z reparameterized,
    plus log q(y | x). Unlabeled rows: Σ_c q(c | x)·(log p(x, c, z_c) -
    log q(z_c | x, c) - log q(c | x)), enumerating every class.
    """
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if x.ndim != 3 or x.shape[1] != 1 or labels.shape != x.shape[:2]:
        raise ContractViolation(
            f"Class-marginalized terms need single-step x [N, 1, D] and labels [N, 1]; "
            f"got {x.shape} and {labels.shape}"
        )
    labeled_rows = np.flatnonzero(labels[:, 0] >= 0)
    unlabeled_rows = np.flatnonzero(labels[:, 0] < 0)
    num_classes = model.num_classes
    no_draw = lambda q_y, t: q_y.mode()  # noqa: E731

    labeled_elbo = labeled_log_q_y = unlabeled_elbo = None
    if labeled_rows.size:
        noise = _single_step_noise(rng.child(0) if rng is not None else None, labeled_rows.size, model.z_dim)
        trace = model.trace(x[labeled_rows], labels[labeled_rows], no_draw, z_noise=noise, pathwise=True)
        labeled_elbo = trace.log_p - trace.log_q_sampled
        labeled_log_q_y = trace.log_q_sup

    if unlabeled_rows.size:
        n_unlabeled = unlabeled_rows.size
        x_rep = np.repeat(x[unlabeled_rows], num_classes, axis=0)
        classes = np.tile(np.arange(num_classes), n_unlabeled)[:, None]
        noise = _single_step_noise(rng.child(1) if rng is not None else None, n_unlabeled, model.z_dim)
        if noise is not None:
            noise = np.repeat(noise, num_classes, axis=0)
        trace = model.trace(x_rep, classes, no_draw, z_noise=noise, pathwise=True)
        log_q_y = ops.reshape(trace.log_q_sup, (n_unlabeled, num_classes))
        inner = ops.reshape(trace.log_p - trace.log_q_sampled, (n_unlabeled, num_classes)) - log_q_y
        unlabeled_elbo = ops.sum(ops.exp(log_q_y) * inner, axis=-1)

    return MarginalTerms(
        labeled_elbo=labeled_elbo,
        labeled_log_q_y=labeled_log_q_y,
        unlabeled_elbo=unlabeled_elbo,
        labeled_rows=labeled_rows,
        unlabeled_rows=unlabeled_rows,
    )


def elbo(
    model: LatentVariableModel,
    x: np.ndarray,
    labels: Optional[np.ndarray] = None,
    rng: Optional[Rng] = None,
) -> GradNode:
    """
    One-sample ELBO of log p(x, y_S), averaged over the batch.

    z is reparameterized. Single-step models with unlabeled rows enumerate y
    instead of sampling it; sequences sample y_U from q and carry no pathwise
    gradient through it.
    """
    x = np.asarray(x, dtype=np.float64)
    if labels is None:
        labels = np.full(x.shape[:2], -1, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)

    if model.KIND == "static":
        terms = marginal_terms(model, x, labels, rng)
        per_row = [t for t in (terms.labeled_elbo, terms.unlabeled_elbo) if t is not None]
        total = per_row[0] if len(per_row) == 1 else ops.concat(per_row, axis=0)
        return ops.mean(total)

    n_rows, length = labels.shape
    if rng is None:
        draw_y = lambda q_y, t: q_y.mode()  # noqa: E731
        z_noise = None
    else:
        gumbel = rng.child(0).gumbel((n_rows, length, model.num_classes))
        draw_y = lambda q_y, t: q_y.sample(noise=gumbel[:, t])  # noqa: E731
        z_noise = rng.child(1).normal((n_rows, length, model.z_dim)) if model.z_dim else None
    trace = model.trace(x, labels, draw_y, z_noise=z_noise, pathwise=True)
    return ops.mean(trace.log_p - trace.log_q_sampled)
