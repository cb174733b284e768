"""
Synthetic HMM sequence task with Gaussian emissions.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.sparse import csgraph

from wakesleep.base.exceptions import ContractViolation
from wakesleep.base.schemas import HmmConfig
from wakesleep.core import Rng

from .dataset import SequenceDataset

logger = logging.getLogger(__name__)


def stationary_distribution(trans: np.ndarray) -> np.ndarray:
    """Left eigenvector of ``trans`` for eigenvalue 1, normalized to sum to 1."""
    values, vectors = linalg.eig(np.asarray(trans, dtype=np.float64).T)
    index = int(np.argmin(np.abs(values - 1.0)))
    # an irreducible chain has a one-signed Perron vector
    pi = np.abs(np.real(vectors[:, index]))
    return pi / pi.sum()


def is_irreducible(trans: np.ndarray) -> bool:
    n_components, _ = csgraph.connected_components(np.asarray(trans) > 0.0, directed=True, connection="strong")
    return n_components == 1


@dataclass
class HmmSpec:
    init: np.ndarray
    trans: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    length: int
    count: int

    @property
    def num_states(self) -> int:
        return self.trans.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.means.shape[1]

    def validate(self, allow_reducible: bool = False) -> None:
        c = self.num_states
        if self.trans.shape != (c, c) or self.init.shape != (c,):
            raise ContractViolation(f"HMM shapes disagree: init {self.init.shape}, trans {self.trans.shape}")
        if self.means.shape != self.stds.shape or self.means.shape[0] != c:
            raise ContractViolation(f"Emission shapes disagree: means {self.means.shape}, stds {self.stds.shape}")
        if np.any(self.trans < 0) or not np.allclose(self.trans.sum(axis=1), 1.0, atol=1e-12):
            raise ContractViolation("Transition rows must be probability vectors")
        if np.any(self.init < 0) or not np.isclose(self.init.sum(), 1.0, atol=1e-12):
            raise ContractViolation("Initial distribution must sum to 1")
        if np.any(self.stds <= 0):
            raise ContractViolation("Emission standard deviations must be positive")
        if self.length < 1 or self.count < 0:
            raise ContractViolation(f"Invalid length {self.length} or count {self.count}")
        if not allow_reducible and not is_irreducible(self.trans):
            raise ContractViolation("Transition matrix is not irreducible")

    @classmethod
    def from_config(cls, config: HmmConfig, length: int, count: int) -> "HmmSpec":
        """Sticky chain started at its stationary distribution, with random well-separated means."""
        c = config.num_states
        off = (1.0 - config.self_transition) / (c - 1)
        trans = np.full((c, c), off)
        np.fill_diagonal(trans, config.self_transition)
        means = config.emission_scale * Rng(config.seed).child(0).normal((c, config.obs_dim))
        return cls(
            init=stationary_distribution(trans),
            trans=trans,
            means=means,
            stds=np.full((c, config.obs_dim), config.emission_std),
            length=length,
            count=count,
        )


def sample_states(spec: HmmSpec, rng: Rng) -> np.ndarray:
    u = rng.child(0).uniform((spec.count, spec.length))
    init_cdf = np.cumsum(spec.init)
    trans_cdf = np.cumsum(spec.trans, axis=1)
    states = np.zeros((spec.count, spec.length), dtype=np.int64)
    states[:, 0] = np.minimum(np.searchsorted(init_cdf, u[:, 0], side="right"), spec.num_states - 1)
    for t in range(1, spec.length):
        cdf = trans_cdf[states[:, t - 1]]
        states[:, t] = np.minimum(np.sum(cdf <= u[:, t, None], axis=1), spec.num_states - 1)
    return states


def gen_hmm(spec: HmmSpec, rng: Rng, allow_reducible: bool = False) -> SequenceDataset:
    """Ancestral samples with every ground-truth state observed."""
    spec.validate(allow_reducible=allow_reducible)
    states = sample_states(spec, rng)
    noise = rng.child(1).normal((spec.count, spec.length, spec.obs_dim))
    x = spec.means[states] + spec.stds[states] * noise
    logger.info(f"Generated {spec.count} HMM sequences of length {spec.length}")
    return SequenceDataset(x, states, num_classes=spec.num_states)
