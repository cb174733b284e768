"""
MNIST IDX reader and label subsampling.

IDX layout (big-endian):

    images: magic 2051, count, rows, cols, then count*rows*cols unsigned bytes
    labels: magic 2049, count, then count unsigned bytes

Either file may be gzip-compressed.
"""

import gzip
import logging
import struct
from pathlib import Path
from typing import Tuple

import numpy as np

from wakesleep.base.exceptions import ContractViolation, DataFormatError
from wakesleep.base.storage import PathLike
from wakesleep.core import Rng

from .dataset import SequenceDataset

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 2051
LABELS_MAGIC = 2049
BINARIZE_THRESHOLD = 0.5
NUM_CLASSES = 10
_GZIP_MAGIC = b"\x1f\x8b"


def _read_bytes(path: PathLike) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == _GZIP_MAGIC:
        try:
            return gzip.decompress(raw)
        except OSError as e:
            raise DataFormatError(f"{path}: corrupt gzip stream: {e}", offset=0)
    return raw


def _header(data: bytes, path: PathLike, magic: int, n_dims: int) -> Tuple[int, ...]:
    size = 4 * (1 + n_dims)
    if len(data) < size:
        raise DataFormatError(
            f"{path}: header truncated ({len(data)} of {size} bytes)", offset=len(data)
        )
    found, *dims = struct.unpack_from(f">{1 + n_dims}I", data, 0)
    if found != magic:
        raise DataFormatError(f"{path}: magic {found}, expected {magic}", offset=0)
    return tuple(dims)


def read_idx_images(path: PathLike) -> np.ndarray:
    """Raw uint8 images [N, rows, cols]."""
    data = _read_bytes(path)
    count, rows, cols = _header(data, path, IMAGES_MAGIC, 3)
    expected = 16 + count * rows * cols
    if len(data) < expected:
        raise DataFormatError(
            f"{path}: pixel data truncated ({len(data)} of {expected} bytes)", offset=len(data)
        )
    pixels = np.frombuffer(data, dtype=np.uint8, count=count * rows * cols, offset=16)
    return pixels.reshape(count, rows, cols)


def read_idx_labels(path: PathLike) -> np.ndarray:
    data = _read_bytes(path)
    (count,) = _header(data, path, LABELS_MAGIC, 1)
    if len(data) < 8 + count:
        raise DataFormatError(
            f"{path}: label data truncated ({len(data)} of {8 + count} bytes)", offset=len(data)
        )
    labels = np.frombuffer(data, dtype=np.uint8, count=count, offset=8).astype(np.int64)
    if count and labels.max() >= NUM_CLASSES:
        bad = int(np.argmax(labels >= NUM_CLASSES))
        raise DataFormatError(f"{path}: label {labels[bad]} out of range", offset=8 + bad)
    return labels


def binarize(pixels: np.ndarray) -> np.ndarray:
    return (pixels.astype(np.float64) / 255.0 >= BINARIZE_THRESHOLD).astype(np.float64)


def load_mnist_idx(images_path: PathLike, labels_path: PathLike) -> SequenceDataset:
    """Binarized images as length-one sequences x [N, 1, rows*cols], every label observed."""
    pixels = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if pixels.shape[0] != labels.shape[0]:
        raise DataFormatError(
            f"{images_path} holds {pixels.shape[0]} images but {labels_path} holds {labels.shape[0]} labels",
            offset=4,
        )
    n_items = pixels.shape[0]
    x = binarize(pixels).reshape(n_items, 1, pixels.shape[1] * pixels.shape[2])
    logger.info(f"Loaded {n_items} MNIST images from {images_path}")
    return SequenceDataset(x, labels.reshape(n_items, 1), num_classes=NUM_CLASSES)


def subsample_labels(
    dataset: SequenceDataset, n_labeled: int, seed: int, balanced: bool = True
) -> SequenceDataset:
    """Keep labels on exactly ``n_labeled`` items (equal count per class if ``balanced``)."""
    truth = dataset.truth[:, 0]
    n_items = len(dataset)
    if n_labeled < 0 or n_labeled > n_items:
        raise ContractViolation(f"n_labeled must lie in [0, {n_items}], got {n_labeled}")
    rng = Rng(seed)
    if n_labeled == n_items:
        keep = np.arange(n_items)
    elif balanced and n_labeled:
        n_classes = dataset.num_classes
        if n_labeled % n_classes:
            raise ContractViolation(
                f"Cannot balance {n_labeled} labels over {n_classes} classes"
            )
        per_class = n_labeled // n_classes
        keep = []
        for c in range(n_classes):
            members = np.flatnonzero(truth == c)
            if members.size < per_class:
                raise ContractViolation(
                    f"Class {c} has {members.size} items, fewer than the {per_class} needed",
                    details={"class": c},
                )
            keep.append(members[np.sort(rng.child(c).choice(members.size, per_class))])
        keep = np.concatenate(keep)
    else:
        keep = rng.choice(n_items, n_labeled)
    labels = np.full(n_items, -1, dtype=np.int64)
    labels[keep] = truth[keep]
    logger.info(f"Kept {len(keep)} of {n_items} labels (balanced={balanced})")
    return dataset.with_labels(labels.reshape(n_items, 1))
