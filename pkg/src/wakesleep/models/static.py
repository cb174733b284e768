"""
Single-step semi-supervised VAE: p(y) uniform, p(z) = N(0, I), p(x | y, z) Bernoulli.

q(y | x) and q(z | x, y) are one-hidden-layer MLP encoders; the decoder reads
[z, onehot(y)]. Sequences of length one are the only valid input.
"""

import logging
from typing import Optional, Sequence

import numpy as np

from wakesleep.base.exceptions import ContractViolation
from wakesleep.core import Rng, constant, ops
from wakesleep.distributions import BernoulliVec, Categorical, DiagGaussian

from .base import GenStep, InferenceStep, LatentVariableModel
from .layers import MLP

logger = logging.getLogger(__name__)


class StaticSemiVAE(LatentVariableModel):
    KIND = "static"

    def __init__(
        self,
        obs_dim: int = 784,
        num_classes: int = 10,
        z_dim: int = 50,
        hidden_dim: int = 500,
        rng: Optional[Rng] = None,
    ):
        super().__init__(num_classes=num_classes, z_dim=z_dim, obs_dim=obs_dim)
        if z_dim < 1:
            raise ContractViolation("StaticSemiVAE needs z_dim >= 1")
        self.hidden_dim = hidden_dim
        self.decoder = MLP(self.theta, "decoder", z_dim + num_classes, hidden_dim, {"logits": obs_dim}, rng)
        self.enc_y = MLP(self.phi, "enc_y", obs_dim, hidden_dim, {"logits": num_classes}, rng)
        self.enc_z = MLP(
            self.phi,
            "enc_z",
            obs_dim + num_classes,
            hidden_dim,
            {"mean": z_dim, "log_std": z_dim},
            rng,
        )

    def initial_gen_state(self, n_rows: int) -> int:
        return n_rows

    def decode(self, y: np.ndarray, z) -> BernoulliVec:
        features = ops.concat([z, constant(ops.one_hot(y, self.num_classes))], axis=-1)
        return BernoulliVec(self.decoder(features)["logits"])

    def q_y(self, x: np.ndarray) -> Categorical:
        return Categorical(self.enc_y(constant(x))["logits"])

    def q_z(self, x: np.ndarray, y: np.ndarray) -> DiagGaussian:
        heads = self.enc_z(ops.concat([constant(x), constant(ops.one_hot(y, self.num_classes))], axis=-1))
        return DiagGaussian(heads["mean"], heads["log_std"])

    def gen_step(self, state, x_prev, y_prev, z_prev) -> GenStep:
        if x_prev is not None:
            raise ContractViolation("StaticSemiVAE has a single step; got a second gen_step")
        n_rows = int(state)
        return GenStep(
            prior_y=Categorical.uniform((n_rows,), self.num_classes),
            prior_z=DiagGaussian.standard((n_rows, self.z_dim)),
            emission=self.decode,
            state=n_rows,
        )

    def inference_context(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[1] != 1 or x.shape[2] != self.obs_dim:
            raise ContractViolation(
                f"StaticSemiVAE expects x of shape [N, 1, {self.obs_dim}], got {x.shape}"
            )
        return x[:, 0]

    def inf_step(self, context, t, state, x_prev, y_prev, z_prev, labels_t, draw_y) -> InferenceStep:
        q_y = self.q_y(context)
        y = self._choose_y(q_y, labels_t, draw_y, t)
        return InferenceStep(q_y=q_y, y=y, q_z=self.q_z(context, y), state=None)

    def reconstruct(self, x: np.ndarray) -> np.ndarray:
        """Decoder probabilities at (argmax q(y|x), mean of q(z|x,y))."""
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.obs_dim)
        y = self.q_y(x).mode()
        z = self.q_z(x, y).mean
        return self.decode(y, constant(z.value)).probs

    def conditional_generate(
        self, x: np.ndarray, y: np.ndarray, classes: Optional[Sequence[int]] = None
    ) -> np.ndarray:
        """
        Hold the style z inferred from (x, y) fixed and decode under each class.

        Returns decoder probabilities of shape [N, len(classes), D_x].
        """
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.obs_dim)
        y = np.asarray(y, dtype=np.int64).reshape(-1)
        if classes is None:
            classes = range(self.num_classes)
        classes = [int(c) for c in classes]
        if any(c < 0 or c >= self.num_classes for c in classes):
            raise ContractViolation(f"classes must lie in [0, {self.num_classes})")
        z = constant(self.q_z(x, y).mean.value)
        out = np.zeros((x.shape[0], len(classes), self.obs_dim))
        for i, c in enumerate(classes):
            out[:, i] = self.decode(np.full(x.shape[0], c), z).probs
        return out
