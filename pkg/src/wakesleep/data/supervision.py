"""
Supervision masks over fully labeled datasets.
"""

import logging

import numpy as np

from wakesleep.base.exceptions import ContractViolation
from wakesleep.base.schemas import SupervisionSpec
from wakesleep.core import Rng

from .dataset import SequenceDataset

logger = logging.getLogger(__name__)


def supervision_mask(shape, spec: SupervisionSpec) -> np.ndarray:
    """Boolean [N, T] mask of supervised steps, deterministic in ``spec.seed``."""
    n_seq, length = shape
    rng = Rng(spec.seed)
    if spec.mode == "per-step-rate":
        return rng.uniform((n_seq, length)) < spec.rate
    if spec.mode == "per-sequence-all-or-none":
        keep = rng.uniform(n_seq) < spec.rate
        return np.repeat(keep[:, None], length, axis=1)
    if spec.mode == "block":
        n_blocks = -(-length // spec.block_length)
        blocks = rng.uniform((n_seq, n_blocks)) < spec.rate
        return np.repeat(blocks, spec.block_length, axis=1)[:, :length]
    raise ContractViolation(f"Unknown supervision mode '{spec.mode}'")


def apply_supervision(dataset: SequenceDataset, spec: SupervisionSpec) -> SequenceDataset:
    """Hide ground-truth labels outside the mask; x and the stored truth are untouched."""
    mask = supervision_mask(dataset.truth.shape, spec) & (dataset.truth >= 0)
    labels = np.where(mask, dataset.truth, -1)
    masked = dataset.with_labels(labels)
    logger.info(
        f"Applied {spec.mode} supervision at rate {spec.rate}: "
        f"{masked.supervision_rate:.3f} of steps labeled"
    )
    return masked
