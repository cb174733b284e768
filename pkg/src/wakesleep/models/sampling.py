"""
Ancestral sampling from p_θ after running the recurrence over a ground-truth prefix.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from wakesleep.base.exceptions import ContractViolation, NumericFault
from wakesleep.core import Rng, constant

from .base import LatentVariableModel

logger = logging.getLogger(__name__)


@dataclass
class Continuation:
    x: np.ndarray
    y: np.ndarray
    step_log_p: np.ndarray
    prefix_y: np.ndarray


def continue_sequence(
    model: LatentVariableModel,
    x_prefix: np.ndarray,
    labels_prefix: Optional[np.ndarray],
    n_steps: int,
    rng: Rng,
) -> Continuation:
    """
    Feed a ground-truth prefix through the model, then sample ``n_steps`` ahead.

    Prefix steps without a label take the argmax of q(y_t); prefix z_t is the
    mean of q(z_t). The sampled steps draw y_t, z_t and x_t from p_θ.
    """
    x_prefix = np.asarray(x_prefix, dtype=np.float64)
    if x_prefix.ndim != 2 or x_prefix.shape[0] < 1:
        raise ContractViolation(f"x_prefix must be [T0 >= 1, D], got {x_prefix.shape}")
    if n_steps < 0:
        raise ContractViolation(f"n_steps must be >= 0, got {n_steps}")
    prefix_len = x_prefix.shape[0]
    if labels_prefix is None:
        labels_prefix = np.full(prefix_len, -1, dtype=np.int64)
    labels_prefix = np.asarray(labels_prefix, dtype=np.int64).reshape(1, prefix_len)

    prefix = model.trace(x_prefix[None], labels_prefix, draw_y=lambda q_y, t: q_y.mode())
    state = prefix.final_gen_state
    x_prev = x_prefix[None, -1]
    y_prev = prefix.y[:, -1]
    z_prev = prefix.last_z

    xs = np.zeros((n_steps, x_prefix.shape[1]))
    ys = np.zeros(n_steps, dtype=np.int64)
    step_log_p = np.zeros(n_steps)
    for t in range(n_steps):
        step_rng = rng.child(t)
        gen = model.gen_step(state, x_prev, y_prev, z_prev)
        y_t = gen.prior_y.sample(step_rng.child(0))
        log_p = gen.prior_y.log_prob(y_t).value
        z_t = None
        if gen.prior_z is not None:
            z_value = gen.prior_z.sample(step_rng.child(1))
            log_p = log_p + gen.prior_z.log_prob(z_value).value
            z_t = constant(z_value)
        emission = gen.emission(y_t, z_t)
        x_t = model.embed_observation(emission.sample(step_rng.child(2)))
        log_p = log_p + emission.log_prob(model.observe(x_t)).value
        if not np.all(np.isfinite(log_p)):
            raise NumericFault(
                f"Non-finite continuation density at step {t}",
                op="continue_sequence",
                details={"t": t},
            )

        xs[t] = x_t[0]
        ys[t] = y_t[0]
        step_log_p[t] = log_p[0]
        state, x_prev, y_prev, z_prev = gen.state, x_t, y_t, z_t

    logger.debug(f"Sampled {n_steps} steps after a {prefix_len}-step prefix")
    return Continuation(x=xs, y=ys, step_log_p=step_log_p, prefix_y=prefix.y[0].copy())
