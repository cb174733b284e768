"""
Sequence datasets with sparse supervision and retained ground truth.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Iterator, Optional, Tuple

import numpy as np

from wakesleep.base.exceptions import ContractViolation, DataFormatError
from wakesleep.base.storage import PathLike, read_archive, write_archive
from wakesleep.core import Rng

logger = logging.getLogger(__name__)

DATASET_KIND = "wakesleep.dataset"


@dataclass(frozen=True)
class LabeledSequence:
    """x_{1:T} with labels[t] = class for t ∈ S and -1 elsewhere."""

    x: np.ndarray
    labels: np.ndarray

    @property
    def length(self) -> int:
        return self.x.shape[0]

    @property
    def supervised_steps(self) -> np.ndarray:
        return np.flatnonzero(self.labels >= 0)

    def label_map(self) -> Dict[int, int]:
        return {int(t): int(self.labels[t]) for t in self.supervised_steps}


def _frozen(array: np.ndarray, dtype) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


class SequenceDataset:
    """
    Equal-length sequences: x [N, T, D], observed labels [N, T] (-1 where
    unsupervised) and ground truth [N, T] (-1 where unknown).

    Arrays are read-only; supervision changes produce a new dataset.
    """

    def __init__(
        self,
        x: np.ndarray,
        labels: np.ndarray,
        truth: Optional[np.ndarray] = None,
        num_classes: Optional[int] = None,
    ):
        x = np.asarray(x)
        labels = np.asarray(labels)
        if x.ndim != 3 or labels.shape != x.shape[:2]:
            raise ContractViolation(
                f"Dataset needs x [N, T, D] and labels [N, T]; got {x.shape} and {labels.shape}"
            )
        truth = labels if truth is None else np.asarray(truth)
        if truth.shape != labels.shape:
            raise ContractViolation(f"truth shape {truth.shape} != labels shape {labels.shape}")
        if num_classes is None:
            num_classes = int(max(truth.max(initial=-1), labels.max(initial=-1)) + 1)
        if labels.size and (labels.min() < -1 or labels.max() >= max(num_classes, 1)):
            raise ContractViolation(f"labels must lie in [-1, {num_classes})")
        observed = labels >= 0
        if np.any(labels[observed] != truth[observed]):
            raise ContractViolation("Observed labels disagree with ground truth")
        self.x = _frozen(x, np.float64)
        self.labels = _frozen(labels, np.int64)
        self.truth = _frozen(truth, np.int64)
        self.num_classes = num_classes

    def __len__(self) -> int:
        return self.x.shape[0]

    def __getitem__(self, index: int) -> LabeledSequence:
        return LabeledSequence(x=self.x[index], labels=self.labels[index])

    @property
    def length(self) -> int:
        return self.x.shape[1]

    @property
    def obs_dim(self) -> int:
        return self.x.shape[2]

    @property
    def supervision_rate(self) -> float:
        return float(np.mean(self.labels >= 0)) if self.labels.size else 0.0

    def labeled_indices(self) -> np.ndarray:
        """Sequences with at least one supervised step."""
        return np.flatnonzero(np.any(self.labels >= 0, axis=1))

    def subset(self, indices: np.ndarray) -> "SequenceDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return SequenceDataset(self.x[indices], self.labels[indices], self.truth[indices], self.num_classes)

    def with_labels(self, labels: np.ndarray) -> "SequenceDataset":
        """Same observations and ground truth under a different supervision mask."""
        return SequenceDataset(self.x, labels, self.truth, self.num_classes)

    def batches(self, batch_size: int, rng: Optional[Rng] = None) -> Iterator[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """(indices, x, labels) per batch; shuffled when an rng is given, the last batch may be short."""
        if batch_size < 1:
            raise ContractViolation(f"batch_size must be >= 1, got {batch_size}")
        order = rng.permutation(len(self)) if rng is not None else np.arange(len(self))
        for start in range(0, len(self), batch_size):
            idx = order[start : start + batch_size]
            yield idx, self.x[idx], self.labels[idx]

    def num_batches(self, batch_size: int) -> int:
        return -(-len(self) // batch_size)


def save_dataset(path: PathLike, dataset: SequenceDataset, meta: Optional[Dict[str, Any]] = None):
    payload_meta = {"kind": DATASET_KIND, "num_classes": dataset.num_classes}
    payload_meta.update(meta or {})
    written = write_archive(
        path,
        {"x": dataset.x, "labels": dataset.labels, "truth": dataset.truth},
        payload_meta,
    )
    logger.info(f"Saved dataset of {len(dataset)} sequences to {written}")
    return written


def load_dataset(path: PathLike) -> Tuple[SequenceDataset, Dict[str, Any]]:
    tensors, meta = read_archive(path)
    if meta.get("kind") != DATASET_KIND:
        raise DataFormatError(f"{path} is not a dataset archive (kind={meta.get('kind')!r})")
    missing = {"x", "labels", "truth"} - set(tensors)
    if missing:
        raise DataFormatError(f"Dataset archive {path} lacks tensors {sorted(missing)}")
    dataset = SequenceDataset(tensors["x"], tensors["labels"], tensors["truth"], meta.get("num_classes"))
    return dataset, meta
