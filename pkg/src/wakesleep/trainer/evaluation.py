"""
Validation: greedy-pass classification accuracy and the average IWAE bound.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from wakesleep.base.exceptions import ContractViolation
from wakesleep.core import Rng
from wakesleep.data.dataset import SequenceDataset
from wakesleep.models.base import LatentVariableModel
from wakesleep.objectives.bounds import loss_p
from wakesleep.particles import sample_particles

logger = logging.getLogger(__name__)


@dataclass
class EvalResult:
    accuracy: float
    topk: Dict[str, float] = field(default_factory=dict)
    loss_p: Optional[float] = None
    n_labels: int = 0


def greedy_class_probs(model: LatentVariableModel, x: np.ndarray) -> np.ndarray:
    """q(y_t | ·) along one pass with y_t = argmax and z_t = mean of q; shape [N, T, C]."""
    x = np.asarray(x, dtype=np.float64)
    labels = np.full(x.shape[:2], -1, dtype=np.int64)
    trace = model.trace(x, labels, draw_y=lambda q_y, t: q_y.mode())
    return trace.q_y_probs


def topk_hits(probs: np.ndarray, truth: np.ndarray, k: int) -> np.ndarray:
    """Whether truth is among the k most probable classes; ties rank the lower index first."""
    ranking = np.argsort(-probs, axis=-1, kind="stable")[..., :k]
    return np.any(ranking == truth[..., None], axis=-1)


def evaluate(
    model: LatentVariableModel,
    dataset: SequenceDataset,
    topk: Sequence[int] = (1, 5, 10),
    K: int = 10,
    rng: Optional[Rng] = None,
    batch_size: int = 256,
) -> EvalResult:
    """
    Accuracy over every step with a ground-truth label, classifying from x alone.

    ``loss_p`` is the mean K-particle bound on log p(x) with labels hidden;
    skipped when no rng is given.
    """
    truth = dataset.truth
    if not np.any(truth >= 0):
        raise ContractViolation("Validation set has no ground-truth labels")
    hits = {k: 0 for k in set(topk) | {1}}
    n_labels = 0
    bound_sum = 0.0
    for batch_index, (idx, x, _) in enumerate(dataset.batches(batch_size)):
        probs = greedy_class_probs(model, x)
        batch_truth = truth[idx]
        known = batch_truth >= 0
        n_labels += int(known.sum())
        for k in hits:
            hits[k] += int(np.sum(topk_hits(probs, np.maximum(batch_truth, 0), k) & known))
        if rng is not None:
            unlabeled = np.full(batch_truth.shape, -1, dtype=np.int64)
            pset = sample_particles(model, x, unlabeled, K, rng.child(batch_index))
            bound_sum += loss_p(pset).item() * len(idx)

    topk_acc = {f"top{k}": hits[k] / n_labels for k in topk}
    accuracy = hits[1] / n_labels
    return EvalResult(
        accuracy=accuracy,
        topk=topk_acc,
        loss_p=bound_sum / len(dataset) if rng is not None else None,
        n_labels=n_labels,
    )
