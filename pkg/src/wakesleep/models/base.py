"""
Abstract base model for semi-supervised latent-variable models over sequences.

A model pairs a generative network p_θ (parameters in ``theta``) with an
inference network q_φ (parameters in ``phi``). Both are stepped forward in
time; :meth:`LatentVariableModel.trace` runs them together over a batch of
rows, clamping supervised labels and accumulating the log densities every
objective needs.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional

import numpy as np

from wakesleep.base.exceptions import ContractViolation, NumericFault
from wakesleep.core import GradNode, constant, ops
from wakesleep.distributions import Categorical, DiagGaussian

from .layers import ParameterSet

logger = logging.getLogger(__name__)

DrawY = Callable[[Categorical, int], np.ndarray]


@dataclass
class GenStep:
    """p_θ(y_t | past), p_θ(z_t | past), and x_t's likelihood as a function of (y_t, z_t)."""

    prior_y: Categorical
    prior_z: Optional[DiagGaussian]
    emission: Callable[[np.ndarray, Optional[GradNode]], Any]
    state: Any


@dataclass
class InferenceStep:
    """q_φ(y_t | ·) (returned even when y_t is clamped), the realized y_t, and q_φ(z_t | ·, y_t)."""

    q_y: Categorical
    y: np.ndarray
    q_z: Optional[DiagGaussian]
    state: Any


@dataclass
class Trace:
    """Joint trajectory for N rows with the densities accumulated along it."""

    y: np.ndarray
    z: Optional[np.ndarray]
    log_p: GradNode
    log_q_sampled: GradNode
    log_q_sup: Optional[GradNode]
    q_y_probs: np.ndarray
    step_log_p: np.ndarray
    step_log_q: np.ndarray
    final_gen_state: Any = None
    last_z: Optional[GradNode] = None

    @property
    def log_q_full(self) -> GradNode:
        if self.log_q_sup is None:
            return self.log_q_sampled
        return self.log_q_sampled + self.log_q_sup


class LatentVariableModel(ABC):
    """
    Abstract base class for p_θ / q_φ pairs.

    Subclasses implement one generative and one inference step; everything
    else (joint traces, densities, checkpoints) is shared.
    """

    KIND: str = "base"

    def __init__(self, num_classes: int, z_dim: int, obs_dim: int):
        if num_classes < 2:
            raise ContractViolation(f"num_classes must be >= 2, got {num_classes}")
        self.num_classes = num_classes
        self.z_dim = z_dim
        self.obs_dim = obs_dim
        self.theta = ParameterSet("theta")
        self.phi = ParameterSet("phi")

    @abstractmethod
    def gen_step(self, state, x_prev, y_prev, z_prev) -> GenStep:
        """Advance the generative recurrence and emit the step's conditionals."""
        pass

    @abstractmethod
    def inference_context(self, x: np.ndarray) -> Any:
        """Summaries of the full observation sequence, computed once per trace."""
        pass

    @abstractmethod
    def inf_step(self, context, t: int, state, x_prev, y_prev, z_prev, labels_t, draw_y) -> InferenceStep:
        """Advance the inference recurrence; clamp y_t where ``labels_t >= 0``."""
        pass

    def initial_gen_state(self, n_rows: int) -> Any:
        return None

    def initial_inf_state(self, n_rows: int) -> Any:
        return None

    def observe(self, x_t: np.ndarray) -> np.ndarray:
        """Convert a data row slice into the emission distribution's value type."""
        return x_t

    def embed_observation(self, value: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`observe` for sampled emissions."""
        return np.asarray(value, dtype=np.float64)

    def _choose_y(self, q_y: Categorical, labels_t: np.ndarray, draw_y, t: int) -> np.ndarray:
        labels_t = np.asarray(labels_t, dtype=np.int64)
        if labels_t.size and (labels_t.min() < -1 or labels_t.max() >= self.num_classes):
            raise ContractViolation(
                f"Labels at step {t} must lie in [-1, {self.num_classes})",
                details={"t": t},
            )
        supervised = labels_t >= 0
        if supervised.all():
            return labels_t
        drawn = np.asarray(draw_y(q_y, t), dtype=np.int64)
        return np.where(supervised, labels_t, drawn)

    def parameters(self) -> Dict[str, GradNode]:
        params = {node.name: node for node in self.theta}
        params.update({node.name: node for node in self.phi})
        return params

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = self.theta.state()
        state.update(self.phi.state())
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        self.theta.load(state)
        self.phi.load(state)

    def zero_grad(self) -> None:
        self.theta.zero_grad()
        self.phi.zero_grad()

    def trace(
        self,
        x: np.ndarray,
        labels: np.ndarray,
        draw_y: DrawY,
        z_noise: Optional[np.ndarray] = None,
        pathwise: bool = False,
    ) -> Trace:
        """
        Run q_φ and p_θ jointly over ``x`` of shape [N, T, D_x].

        Unsupervised y_t come from ``draw_y``; supervised ones (``labels >= 0``)
        are clamped. z_t = mean + std·``z_noise[:, t]``, detached from φ unless
        ``pathwise``. log q(y_t) at supervised steps goes to ``log_q_sup``
        instead of ``log_q_sampled``.
        """
        x = np.asarray(x, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if x.ndim != 3 or labels.shape != x.shape[:2]:
            raise ContractViolation(
                f"trace needs x [N, T, D] and labels [N, T]; got {x.shape} and {labels.shape}"
            )
        n_rows, length = labels.shape
        if self.z_dim > 0:
            if z_noise is None:
                z_noise = np.zeros((n_rows, length, self.z_dim))
            if z_noise.shape != (n_rows, length, self.z_dim):
                raise ContractViolation(
                    f"z_noise shape {z_noise.shape} != {(n_rows, length, self.z_dim)}"
                )

        context = self.inference_context(x)
        log_p = constant(np.zeros(n_rows))
        log_q_sampled = constant(np.zeros(n_rows))
        log_q_sup = None
        ys = np.zeros((n_rows, length), dtype=np.int64)
        zs = np.zeros((n_rows, length, self.z_dim)) if self.z_dim > 0 else None
        q_y_probs = np.zeros((n_rows, length, self.num_classes))
        step_log_p = np.zeros((n_rows, length))
        step_log_q = np.zeros((n_rows, length))

        gen_state = self.initial_gen_state(n_rows)
        inf_state = self.initial_inf_state(n_rows)
        x_prev = y_prev = z_prev = None
        for t in range(length):
            inf = self.inf_step(context, t, inf_state, x_prev, y_prev, z_prev, labels[:, t], draw_y)
            y_t = inf.y
            z_t = None
            if inf.q_z is not None:
                if pathwise:
                    z_t = inf.q_z.rsample(noise=z_noise[:, t])
                else:
                    z_t = constant(inf.q_z.sample(noise=z_noise[:, t]))
                zs[:, t] = z_t.value

            gen = self.gen_step(gen_state, x_prev, y_prev, z_prev)
            lp_t = gen.prior_y.log_prob(y_t) + gen.emission(y_t, z_t).log_prob(self.observe(x[:, t]))
            if gen.prior_z is not None:
                lp_t = lp_t + gen.prior_z.log_prob(z_t)

            lq_y = inf.q_y.log_prob(y_t)
            supervised = labels[:, t] >= 0
            if supervised.any():
                lq_t = ops.where(supervised, 0.0, lq_y)
                sup_t = ops.where(supervised, lq_y, 0.0)
                log_q_sup = sup_t if log_q_sup is None else log_q_sup + sup_t
            else:
                lq_t = lq_y
            if inf.q_z is not None:
                lq_t = lq_t + inf.q_z.log_prob(z_t)

            self._check_finite(lp_t, "log p", t)
            self._check_finite(lq_y, "log q(y)", t)
            self._check_finite(lq_t, "log q", t)

            log_p = log_p + lp_t
            log_q_sampled = log_q_sampled + lq_t
            ys[:, t] = y_t
            q_y_probs[:, t] = inf.q_y.probs
            step_log_p[:, t] = lp_t.value
            step_log_q[:, t] = lq_t.value + np.where(supervised, lq_y.value, 0.0)

            gen_state, inf_state = gen.state, inf.state
            x_prev, y_prev, z_prev = x[:, t], y_t, z_t

        return Trace(
            y=ys,
            z=zs,
            log_p=log_p,
            log_q_sampled=log_q_sampled,
            log_q_sup=log_q_sup,
            q_y_probs=q_y_probs,
            step_log_p=step_log_p,
            step_log_q=step_log_q,
            final_gen_state=gen_state,
            last_z=z_prev,
        )

    @staticmethod
    def _check_finite(node: GradNode, what: str, t: int) -> None:
        bad = ~np.isfinite(node.value)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise NumericFault(
                f"Non-finite {what} at row {row}, step {t}",
                op=what,
                details={"row": row, "t": t},
            )
