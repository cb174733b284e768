"""
All-discrete sequential model small enough to enumerate.

p_θ is an HMM over hidden classes y_t with a categorical emission over a
finite alphabet; q_φ is a per-step table q(y_t | y_{t-1}) that is not
amortized over x, so it can represent the exact posterior of one fixed
sequence. Observations are stored as ``[T, 1]`` float arrays holding symbol
indices.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from wakesleep.base.exceptions import ContractViolation
from wakesleep.core import Rng, ops
from wakesleep.distributions import Categorical

from .base import GenStep, InferenceStep, LatentVariableModel

logger = logging.getLogger(__name__)

MAX_TABLE_SIZE = 10**6


@dataclass
class JointTable:
    """Every latent configuration with its exact log p_θ(config, x, y_S)."""

    configs: np.ndarray
    log_joint: np.ndarray

    @property
    def log_marginal(self) -> float:
        return float(special.logsumexp(self.log_joint))

    @property
    def posterior(self) -> np.ndarray:
        return np.exp(self.log_joint - self.log_marginal)


class EnumerableToy(LatentVariableModel):
    KIND = "toy"

    def __init__(self, num_classes: int = 3, alphabet_size: int = 3, max_length: int = 4):
        super().__init__(num_classes=num_classes, z_dim=0, obs_dim=1)
        if alphabet_size < 2:
            raise ContractViolation(f"alphabet_size must be >= 2, got {alphabet_size}")
        self.alphabet_size = alphabet_size
        self.max_length = max_length
        self.init_logits = self.theta.create("init", np.zeros(num_classes))
        self.trans_logits = self.theta.create("trans", np.zeros((num_classes, num_classes)))
        self.emit_logits = self.theta.create("emit", np.zeros((num_classes, alphabet_size)))
        # row C holds q(y_1), rows 0..C-1 hold q(y_t | y_{t-1})
        self.q_logits = self.phi.create("q", np.zeros((max_length, num_classes + 1, num_classes)))

    @classmethod
    def random(
        cls,
        rng: Rng,
        num_classes: int = 3,
        alphabet_size: int = 3,
        max_length: int = 4,
        scale: float = 1.0,
    ) -> "EnumerableToy":
        toy = cls(num_classes=num_classes, alphabet_size=alphabet_size, max_length=max_length)
        for node in list(toy.theta) + list(toy.phi):
            node.value = scale * rng.normal(node.shape)
        return toy

    @classmethod
    def from_probabilities(
        cls,
        init: np.ndarray,
        trans: np.ndarray,
        emit: np.ndarray,
        max_length: int = 4,
        q_logits: Optional[np.ndarray] = None,
    ) -> "EnumerableToy":
        """Build a toy whose CPTs are exactly the given probability tables."""
        init, trans, emit = (np.asarray(a, dtype=np.float64) for a in (init, trans, emit))
        num_classes, alphabet_size = emit.shape
        if init.shape != (num_classes,) or trans.shape != (num_classes, num_classes):
            raise ContractViolation(
                f"CPT shapes disagree: init {init.shape}, trans {trans.shape}, emit {emit.shape}"
            )
        for name, table in (("init", init), ("trans", trans), ("emit", emit)):
            if not np.allclose(table.sum(axis=-1), 1.0, atol=1e-12):
                raise ContractViolation(f"{name} rows must sum to 1")
            if np.any(table <= 0.0):
                raise ContractViolation(f"{name} entries must be strictly positive")
        toy = cls(num_classes=num_classes, alphabet_size=alphabet_size, max_length=max_length)
        toy.init_logits.value = np.log(init)
        toy.trans_logits.value = np.log(trans)
        toy.emit_logits.value = np.log(emit)
        if q_logits is not None:
            toy.set_q_logits(q_logits)
        return toy

    def set_q_logits(self, q_logits: np.ndarray) -> None:
        q_logits = np.asarray(q_logits, dtype=np.float64)
        if q_logits.shape != self.q_logits.shape:
            raise ContractViolation(f"q logits shape {q_logits.shape} != {self.q_logits.shape}")
        self.q_logits.value = q_logits.copy()

    def observe(self, x_t: np.ndarray) -> np.ndarray:
        symbols = np.asarray(x_t)[..., 0]
        return np.rint(symbols).astype(np.int64)

    def embed_observation(self, value: np.ndarray) -> np.ndarray:
        return np.asarray(value, dtype=np.float64)[..., None]

    def initial_gen_state(self, n_rows: int) -> int:
        return n_rows

    def gen_step(self, state, x_prev, y_prev, z_prev) -> GenStep:
        n_rows = int(state)
        if y_prev is None:
            logits = self.init_logits + np.zeros((n_rows, self.num_classes))
        else:
            logits = ops.take_rows(self.trans_logits, y_prev)

        def emission(y_t, z_t):
            return Categorical(ops.take_rows(self.emit_logits, y_t))

        return GenStep(prior_y=Categorical(logits), prior_z=None, emission=emission, state=n_rows)

    def inference_context(self, x: np.ndarray) -> int:
        x = np.asarray(x)
        if x.ndim != 3 or x.shape[-1] != 1:
            raise ContractViolation(f"EnumerableToy expects x of shape [N, T, 1], got {x.shape}")
        if x.shape[1] > self.max_length:
            raise ContractViolation(
                f"Sequence length {x.shape[1]} exceeds the toy's max_length {self.max_length}"
            )
        symbols = self.observe(x)
        if symbols.size and (symbols.min() < 0 or symbols.max() >= self.alphabet_size):
            raise ContractViolation(f"Observed symbols must lie in [0, {self.alphabet_size})")
        return x.shape[0]

    def inf_step(self, context, t, state, x_prev, y_prev, z_prev, labels_t, draw_y) -> InferenceStep:
        n_rows = int(context)
        rows = np.full(n_rows, self.num_classes) if y_prev is None else y_prev
        q_y = Categorical(ops.take_rows(ops.index(self.q_logits, t), rows))
        y = self._choose_y(q_y, labels_t, draw_y, t)
        return InferenceStep(q_y=q_y, y=y, q_z=None, state=None)

    def table_size(self, labels: np.ndarray) -> int:
        n_free = int(np.sum(np.asarray(labels) < 0))
        return self.num_classes ** n_free

    def enumerate_configs(self, labels: np.ndarray) -> np.ndarray:
        """Every y_{1:T} agreeing with ``labels`` at supervised steps, as rows of an int array."""
        labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        size = self.table_size(labels)
        if size > MAX_TABLE_SIZE:
            raise ContractViolation(
                f"Enumeration table would hold {size} configurations (limit {MAX_TABLE_SIZE})",
                details={"size": size, "limit": MAX_TABLE_SIZE},
            )
        free = np.flatnonzero(labels < 0)
        configs = np.tile(labels, (size, 1))
        if free.size:
            grid = np.array(list(itertools.product(range(self.num_classes), repeat=free.size)))
            configs[:, free] = grid
        return configs

    def enumerate_joint(self, x: np.ndarray, labels: np.ndarray) -> JointTable:
        """Exact log p_θ(y, x) for every configuration consistent with the supervised labels."""
        x = np.asarray(x, dtype=np.float64).reshape(-1, 1)
        labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        if labels.shape[0] != x.shape[0]:
            raise ContractViolation(f"x has {x.shape[0]} steps but labels has {labels.shape[0]}")
        configs = self.enumerate_configs(labels)
        n_configs = configs.shape[0]
        trace = self.trace(
            np.broadcast_to(x, (n_configs,) + x.shape),
            np.tile(labels, (n_configs, 1)),
            draw_y=lambda q_y, t: configs[:, t],
        )
        return JointTable(configs=configs, log_joint=trace.log_p.value.copy())

    def sample_sequences(self, count: int, length: int, rng: Rng):
        """Ancestral draws from p_θ; returns (x [count, length, 1], y [count, length])."""
        if length > self.max_length:
            raise ContractViolation(f"length {length} exceeds the toy's max_length {self.max_length}")
        init = special.softmax(self.init_logits.value)
        trans = special.softmax(self.trans_logits.value, axis=-1)
        emit = special.softmax(self.emit_logits.value, axis=-1)
        y = np.zeros((count, length), dtype=np.int64)
        symbols = np.zeros((count, length), dtype=np.int64)
        for n in range(count):
            row_rng = rng.child(n)
            for t in range(length):
                probs = init if t == 0 else trans[y[n, t - 1]]
                y[n, t] = row_rng.child(t, 0).categorical(probs)
                symbols[n, t] = row_rng.child(t, 1).categorical(emit[y[n, t]])
        return self.embed_observation(symbols), y
