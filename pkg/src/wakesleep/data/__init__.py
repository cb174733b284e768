"""
Datasets: MNIST IDX files and the synthetic HMM sequence task.
"""

from .dataset import LabeledSequence, SequenceDataset, load_dataset, save_dataset
from .download import download_archive, fetch_mnist
from .hmm import HmmSpec, gen_hmm, is_irreducible, stationary_distribution
from .mnist import load_mnist_idx, subsample_labels
from .supervision import apply_supervision, supervision_mask

__all__ = [
    "HmmSpec",
    "LabeledSequence",
    "SequenceDataset",
    "apply_supervision",
    "download_archive",
    "fetch_mnist",
    "gen_hmm",
    "is_irreducible",
    "load_dataset",
    "load_mnist_idx",
    "save_dataset",
    "stationary_distribution",
    "subsample_labels",
    "supervision_mask",
]
