"""
Structured recurrent model with a discrete label y_t and a continuous style z_t per step.

Generative side: a GRU state h_t summarizes (x_{<t}, y_{<t}, z_{<t}); y_t and
z_t are drawn from heads on h_t, and x_t from a head on (h_t, y_t, z_t).
Inference side: a backward GRU over x gives b_t (a summary of x_{t:T}); a
forward GRU g_t summarizes (x_{<t}, y_{<t}, z_{<t}); q(y_t) reads (g_t, b_t)
and q(z_t) additionally reads the realized y_t.
"""

import logging
from typing import List, Optional

import numpy as np

from wakesleep.base.exceptions import ContractViolation
from wakesleep.core import GradNode, Rng, constant, ops
from wakesleep.distributions import BernoulliVec, Categorical, DiagGaussian

from .base import GenStep, InferenceStep, LatentVariableModel
from .layers import GRUCell, Linear, fan_in_uniform

logger = logging.getLogger(__name__)


class SeqModel(LatentVariableModel):
    KIND = "sequential"

    def __init__(
        self,
        obs_dim: int,
        num_classes: int,
        z_dim: int,
        hidden_dim: int = 64,
        observation: str = "gaussian",
        rng: Optional[Rng] = None,
    ):
        super().__init__(num_classes=num_classes, z_dim=z_dim, obs_dim=obs_dim)
        if observation not in ("gaussian", "bernoulli"):
            raise ContractViolation(f"Unknown observation likelihood '{observation}'")
        self.hidden_dim = hidden_dim
        self.observation = observation
        step_input = obs_dim + num_classes + z_dim

        self.h0 = self.theta.create("gen.h0", fan_in_uniform(rng, (1, hidden_dim), hidden_dim))
        self.gen_cell = GRUCell(self.theta, "gen.cell", step_input, hidden_dim, rng)
        self.head_y = Linear(self.theta, "gen.head_y", hidden_dim, num_classes, rng)
        if z_dim > 0:
            self.head_z_mean = Linear(self.theta, "gen.head_z_mean", hidden_dim, z_dim, rng)
            self.head_z_log_std = Linear(self.theta, "gen.head_z_log_std", hidden_dim, z_dim, rng)
        self.emit_hidden = Linear(self.theta, "gen.emit_hidden", hidden_dim + num_classes + z_dim, hidden_dim, rng)
        self.emit_loc = Linear(self.theta, "gen.emit_loc", hidden_dim, obs_dim, rng)
        if observation == "gaussian":
            self.emit_log_std = Linear(self.theta, "gen.emit_log_std", hidden_dim, obs_dim, rng)

        self.g0 = self.phi.create("inf.g0", fan_in_uniform(rng, (1, hidden_dim), hidden_dim))
        self.back_cell = GRUCell(self.phi, "inf.backward_cell", obs_dim, hidden_dim, rng)
        self.inf_cell = GRUCell(self.phi, "inf.cell", step_input, hidden_dim, rng)
        self.q_y_head = Linear(self.phi, "inf.q_y", 2 * hidden_dim, num_classes, rng)
        if z_dim > 0:
            self.q_z_mean = Linear(self.phi, "inf.q_z_mean", 2 * hidden_dim + num_classes, z_dim, rng)
            self.q_z_log_std = Linear(self.phi, "inf.q_z_log_std", 2 * hidden_dim + num_classes, z_dim, rng)

    def _step_input(self, n_rows: int, x_prev, y_prev, z_prev) -> GradNode:
        if x_prev is None:
            return constant(np.zeros((n_rows, self.obs_dim + self.num_classes + self.z_dim)))
        parts = [constant(x_prev), constant(ops.one_hot(y_prev, self.num_classes))]
        if self.z_dim > 0:
            parts.append(z_prev)
        return ops.concat(parts, axis=-1)

    def initial_gen_state(self, n_rows: int) -> GradNode:
        return self.h0 + np.zeros((n_rows, self.hidden_dim))

    def initial_inf_state(self, n_rows: int) -> GradNode:
        return self.g0 + np.zeros((n_rows, self.hidden_dim))

    def gen_step(self, state, x_prev, y_prev, z_prev) -> GenStep:
        if state is None:
            raise ContractViolation("SeqModel.gen_step needs a state; start from initial_gen_state")
        n_rows = state.shape[0]
        h = self.gen_cell(self._step_input(n_rows, x_prev, y_prev, z_prev), state)

        prior_y = Categorical(self.head_y(h))
        prior_z = None
        if self.z_dim > 0:
            prior_z = DiagGaussian(self.head_z_mean(h), self.head_z_log_std(h))

        def emission(y_t, z_t):
            parts = [h, constant(ops.one_hot(y_t, self.num_classes))]
            if self.z_dim > 0:
                parts.append(z_t)
            features = ops.softplus(self.emit_hidden(ops.concat(parts, axis=-1)))
            if self.observation == "bernoulli":
                return BernoulliVec(self.emit_loc(features))
            return DiagGaussian(self.emit_loc(features), self.emit_log_std(features))

        return GenStep(prior_y=prior_y, prior_z=prior_z, emission=emission, state=h)

    def inference_context(self, x: np.ndarray) -> List[GradNode]:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[-1] != self.obs_dim:
            raise ContractViolation(f"SeqModel expects x of shape [N, T, {self.obs_dim}], got {x.shape}")
        n_rows, length, _ = x.shape
        summaries: List[Optional[GradNode]] = [None] * length
        b = constant(np.zeros((n_rows, self.hidden_dim)))
        for t in reversed(range(length)):
            b = self.back_cell(constant(x[:, t]), b)
            summaries[t] = b
        return summaries

    def inf_step(self, context, t, state, x_prev, y_prev, z_prev, labels_t, draw_y) -> InferenceStep:
        backward_summary = context[t]
        n_rows = backward_summary.shape[0]
        g = self.inf_cell(self._step_input(n_rows, x_prev, y_prev, z_prev), state)
        features = ops.concat([g, backward_summary], axis=-1)

        q_y = Categorical(self.q_y_head(features))
        y_t = self._choose_y(q_y, labels_t, draw_y, t)
        q_z = None
        if self.z_dim > 0:
            z_in = ops.concat([features, constant(ops.one_hot(y_t, self.num_classes))], axis=-1)
            q_z = DiagGaussian(self.q_z_mean(z_in), self.q_z_log_std(z_in))
        return InferenceStep(q_y=q_y, y=y_t, q_z=q_z, state=g)
