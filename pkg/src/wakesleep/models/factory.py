"""
Model construction from configuration.
"""

import logging
from typing import Optional

from wakesleep.base.exceptions import ConfigurationError
from wakesleep.base.schemas import ModelConfig
from wakesleep.core import Rng

from .base import LatentVariableModel
from .sequential import SeqModel
from .static import StaticSemiVAE
from .toy import EnumerableToy

logger = logging.getLogger(__name__)


def build_model(config: ModelConfig, rng: Optional[Rng] = None) -> LatentVariableModel:
    """Instantiate the configured model; ``zero_init`` (or no rng) gives all-zero weights."""
    init_rng = None if config.zero_init else rng
    if config.kind == "sequential":
        model = SeqModel(
            obs_dim=config.obs_dim,
            num_classes=config.num_classes,
            z_dim=config.z_dim,
            hidden_dim=config.hidden_dim,
            observation=config.observation,
            rng=init_rng,
        )
    elif config.kind == "static":
        if config.observation != "bernoulli":
            raise ConfigurationError("The static model only supports Bernoulli observations")
        model = StaticSemiVAE(
            obs_dim=config.obs_dim,
            num_classes=config.num_classes,
            z_dim=config.z_dim,
            hidden_dim=config.hidden_dim,
            rng=init_rng,
        )
    elif config.kind == "toy":
        if init_rng is None:
            model = EnumerableToy(
                num_classes=config.num_classes,
                alphabet_size=config.alphabet_size,
                max_length=config.max_length,
            )
        else:
            model = EnumerableToy.random(
                init_rng,
                num_classes=config.num_classes,
                alphabet_size=config.alphabet_size,
                max_length=config.max_length,
            )
    else:
        raise ConfigurationError(f"Unknown model kind '{config.kind}'")

    n_params = sum(node.value.size for node in model.parameters().values())
    logger.info(f"Built {model.KIND} model with {n_params} parameters")
    return model
