"""
K-particle sampling from q_φ with supervised labels clamped.

A batch of B sequences becomes N = B·K rows, sequence-major (row ``b*K + k``).
Row (b, k) draws all of its noise from its own stream ``rng.child(b, k)``, so
the particles it produces do not depend on how many other rows are sampled
alongside it.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from wakesleep.base.exceptions import ContractViolation, NumericFault
from wakesleep.core import GradNode, Rng
from wakesleep.models.base import LatentVariableModel, Trace

from .weights import log_weight_variance, normalize_weights

logger = logging.getLogger(__name__)


@dataclass
class Particle:
    """Read-only view of one particle."""

    y: np.ndarray
    z: Optional[np.ndarray]
    log_p_joint: float
    log_q_sampled: float
    log_q_full: float


@dataclass
class ParticleSet:
    """K particles for each of B sequences, with their densities as graph nodes of shape [B·K]."""

    num_sequences: int
    K: int
    labels: np.ndarray
    trace: Trace
    _ssws: Optional[Tuple[np.ndarray, np.ndarray]] = field(default=None, repr=False)

    @property
    def log_p(self) -> GradNode:
        return self.trace.log_p

    @property
    def log_q_sampled(self) -> GradNode:
        return self.trace.log_q_sampled

    @property
    def log_q_sup(self) -> Optional[GradNode]:
        return self.trace.log_q_sup

    @property
    def log_q_full(self) -> GradNode:
        return self.trace.log_q_full

    @property
    def y(self) -> np.ndarray:
        return self.trace.y.reshape(self.num_sequences, self.K, -1)

    @property
    def z(self) -> Optional[np.ndarray]:
        if self.trace.z is None:
            return None
        return self.trace.z.reshape((self.num_sequences, self.K) + self.trace.z.shape[1:])

    @property
    def n_supervised(self) -> np.ndarray:
        return np.sum(self.labels >= 0, axis=1)

    @property
    def n_unsupervised(self) -> np.ndarray:
        return np.sum(self.labels < 0, axis=1)

    def _per_sequence(self, values: np.ndarray) -> np.ndarray:
        return values.reshape(self.num_sequences, self.K)

    def log_w_ssws(self) -> np.ndarray:
        return self._per_sequence(self.log_p.value - self.log_q_sampled.value)

    def log_w_cws(self) -> np.ndarray:
        return self._per_sequence(self.log_p.value - self.log_q_full.value)

    def ssws_weights(self) -> Tuple[np.ndarray, np.ndarray]:
        """(w̄, ess), each per sequence; computed once."""
        if self._ssws is None:
            self._ssws = normalize_weights(self.log_w_ssws())
        return self._ssws

    @property
    def ess(self) -> np.ndarray:
        return self.ssws_weights()[1]

    def weight_log_variance(self) -> np.ndarray:
        return log_weight_variance(self.log_w_ssws())

    def particle(self, b: int, k: int) -> Particle:
        if not (0 <= b < self.num_sequences and 0 <= k < self.K):
            raise ContractViolation(f"Particle index ({b}, {k}) out of range")
        row = b * self.K + k
        return Particle(
            y=self.trace.y[row].copy(),
            z=None if self.trace.z is None else self.trace.z[row].copy(),
            log_p_joint=float(self.log_p.value[row]),
            log_q_sampled=float(self.log_q_sampled.value[row]),
            log_q_full=float(self.log_q_full.value[row]),
        )


def cws_weights(pset: ParticleSet) -> np.ndarray:
    """w̃: weights whose denominator also carries q_φ(y_S | ·)."""
    return normalize_weights(pset.log_w_cws())[0]


def particle_noise(
    rng: Rng, num_sequences: int, K: int, length: int, num_classes: int, z_dim: int
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Gumbel noise for y and standard-normal noise for z, one stream per (b, k)."""
    n_rows = num_sequences * K
    gumbel = np.empty((n_rows, length, num_classes))
    normal = np.empty((n_rows, length, z_dim)) if z_dim > 0 else None
    for b in range(num_sequences):
        for k in range(K):
            stream = rng.child(b, k)
            row = b * K + k
            gumbel[row] = stream.gumbel((length, num_classes))
            if normal is not None:
                normal[row] = stream.normal((length, z_dim))
    return gumbel, normal


def sample_particles(
    model: LatentVariableModel,
    x: np.ndarray,
    labels: np.ndarray,
    K: int,
    rng: Rng,
    pathwise: bool = False,
) -> ParticleSet:
    """
    Draw K joint samples (y_U, z) from q_φ for every sequence of the batch.

    ``x`` is [B, T, D_x] and ``labels`` [B, T] with -1 at unsupervised steps.
    z is detached from φ unless ``pathwise``.
    """
    if K < 1:
        raise ContractViolation(f"sample_particles needs K >= 1, got {K}")
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if x.ndim != 3 or labels.shape != x.shape[:2]:
        raise ContractViolation(
            f"sample_particles needs x [B, T, D] and labels [B, T]; got {x.shape} and {labels.shape}"
        )
    num_sequences, length = labels.shape
    gumbel, z_noise = particle_noise(rng, num_sequences, K, length, model.num_classes, model.z_dim)

    try:
        trace = model.trace(
            np.repeat(x, K, axis=0),
            np.repeat(labels, K, axis=0),
            draw_y=lambda q_y, t: q_y.sample(noise=gumbel[:, t]),
            z_noise=z_noise,
            pathwise=pathwise,
        )
    except NumericFault as e:
        row = e.details.get("row")
        if row is None:
            raise
        b, k = divmod(int(row), K)
        t = e.details.get("t")
        logger.error(f"Non-finite density for sequence {b}, particle {k}, step {t}")
        raise NumericFault(
            f"Non-finite {e.op} at sequence {b}, particle {k}, step {t}",
            op=e.op,
            details={"b": b, "k": k, "t": t},
        ) from e

    return ParticleSet(num_sequences=num_sequences, K=K, labels=labels, trace=trace)
