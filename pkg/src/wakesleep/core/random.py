"""
Counter-based random streams.

Every stream is a Philox generator keyed by a 64-bit seed plus a path of
integers, e.g. ``(epoch, batch, sequence, particle)``. Drawing from one stream
never advances another, so evaluating particles in any order (or in parallel)
cannot change the values they see.
"""

from typing import Tuple

import numpy as np


class Rng:
    """A reproducible random stream identified by (seed, stream path)."""

    ALGORITHM = "philox4x64"

    def __init__(self, seed: int, stream: Tuple[int, ...] = ()):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream = tuple(int(s) for s in stream)
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=self.stream)
        self._generator = np.random.Generator(np.random.Philox(sequence))

    def child(self, *path: int) -> "Rng":
        """Independent sub-stream extending this stream's path."""
        return Rng(self.seed, self.stream + tuple(path))

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def normal(self, shape) -> np.ndarray:
        return self._generator.standard_normal(shape)

    def uniform(self, shape) -> np.ndarray:
        return self._generator.random(shape)

    def gumbel(self, shape) -> np.ndarray:
        return self._generator.gumbel(size=shape)

    def integers(self, low: int, high: int, shape=None) -> np.ndarray:
        return self._generator.integers(low, high, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._generator.permutation(n)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self._generator.choice(n, size=size, replace=replace)

    def categorical(self, probs: np.ndarray) -> int:
        return int(self._generator.choice(len(probs), p=probs))

    def __repr__(self) -> str:
        return f"Rng({self.ALGORITHM}, seed={self.seed}, stream={self.stream})"
