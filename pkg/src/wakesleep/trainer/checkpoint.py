"""
Checkpoints: model parameters, optimizer moments and loop position in one archive.

The archive stores a digest of the training config. Loading under a config
with a different digest is refused unless explicitly overridden; the run-length
fields (``epochs``, ``max_steps``) are left out of the digest so a finished run
can be extended.
"""

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from wakesleep.base.exceptions import CheckpointError, DataFormatError
from wakesleep.base.schemas import TrainConfig
from wakesleep.base.storage import PathLike, config_digest, read_archive, write_archive
from wakesleep.models.base import LatentVariableModel

from .optimizer import Adam

logger = logging.getLogger(__name__)

CHECKPOINT_KIND = "wakesleep.checkpoint"
RUN_LENGTH_FIELDS = ("epochs", "max_steps")


def checkpoint_config_hash(config: TrainConfig) -> str:
    return config_digest(config, exclude=RUN_LENGTH_FIELDS)


@dataclass
class LoopState:
    """Where the training loop stands; ``batch`` is the next batch index within ``epoch``."""

    step: int = 0
    epoch: int = 0
    batch: int = 0
    best_accuracy: float = -1.0
    best_step: int = -1
    bad_evals: int = 0


@dataclass
class Checkpoint:
    params: Dict[str, np.ndarray]
    optimizer: Dict[str, np.ndarray]
    loop: LoopState
    config_hash: str
    config: Dict


def save_checkpoint(
    path: PathLike,
    model: LatentVariableModel,
    optimizers: Dict[str, Adam],
    loop: LoopState,
    config: TrainConfig,
) -> Path:
    tensors = dict(model.state_dict())
    for prefix, optimizer in optimizers.items():
        tensors.update(optimizer.state_dict(f"opt.{prefix}"))
    meta = {
        "kind": CHECKPOINT_KIND,
        "config_hash": checkpoint_config_hash(config),
        "config": json.loads(config.model_dump_json()),
        "loop": asdict(loop),
    }
    written = write_archive(path, tensors, meta)
    logger.info(f"Checkpoint at step {loop.step} written to {written}")
    return written


def load_checkpoint(
    path: PathLike, config: Optional[TrainConfig] = None, allow_config_mismatch: bool = False
) -> Checkpoint:
    try:
        tensors, meta = read_archive(path)
    except FileNotFoundError:
        raise CheckpointError(f"No checkpoint at {path}", details={"path": str(path)})
    except DataFormatError as e:
        raise CheckpointError(f"Unreadable checkpoint {path}: {e.message}", details=e.details)
    if meta.get("kind") != CHECKPOINT_KIND:
        raise CheckpointError(f"{path} is not a checkpoint (kind={meta.get('kind')!r})")

    stored_hash = meta.get("config_hash")
    if config is not None:
        expected = checkpoint_config_hash(config)
        if stored_hash != expected:
            if not allow_config_mismatch:
                raise CheckpointError(
                    f"Checkpoint {path} was written under a different config",
                    details={"stored": stored_hash, "expected": expected},
                )
            logger.warning(f"Loading {path} despite config hash mismatch ({stored_hash[:12]} != {expected[:12]})")

    params = {k: v for k, v in tensors.items() if not k.startswith("opt.")}
    optimizer = {k: v for k, v in tensors.items() if k.startswith("opt.")}
    return Checkpoint(
        params=params,
        optimizer=optimizer,
        loop=LoopState(**meta.get("loop", {})),
        config_hash=stored_hash,
        config=meta.get("config", {}),
    )


def restore(
    checkpoint: Checkpoint, model: LatentVariableModel, optimizers: Optional[Dict[str, Adam]] = None
) -> LoopState:
    model.load_state_dict(checkpoint.params)
    for prefix, optimizer in (optimizers or {}).items():
        optimizer.load_state_dict(checkpoint.optimizer, f"opt.{prefix}")
    return checkpoint.loop
