"""Pytest configuration for wakesleep tests."""

import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))


@pytest.fixture
def rng():
    from wakesleep.core import Rng
    return Rng(1234)


@pytest.fixture
def toy():
    """Random 3-class toy over a 3-symbol alphabet, sequences up to length 4."""
    from wakesleep.core import Rng
    from wakesleep.models import EnumerableToy
    return EnumerableToy.random(Rng(7), num_classes=3, alphabet_size=3, max_length=4)


@pytest.fixture
def toy_sequence():
    import numpy as np
    return np.array([[0.0], [2.0], [1.0], [1.0]])


@pytest.fixture
def seq_model():
    from wakesleep.core import Rng
    from wakesleep.models import SeqModel
    return SeqModel(obs_dim=2, num_classes=3, z_dim=2, hidden_dim=5, rng=Rng(3))


@pytest.fixture
def smoke_config():
    """Tiny sequential run on a generated HMM task."""
    from wakesleep.base.schemas import TrainConfig
    return TrainConfig.model_validate({
        "objective": "cws",
        "K": 3,
        "batch_size": 8,
        "epochs": 2,
        "eval_every": 2,
        "eval_K": 2,
        "eval_topk": [1, 2],
        "model": {"kind": "sequential", "num_classes": 3, "obs_dim": 2, "z_dim": 1, "hidden_dim": 4},
        "dataset": {
            "kind": "hmm",
            "length": 5,
            "train_count": 16,
            "val_count": 8,
            "hmm": {"num_states": 3, "obs_dim": 2, "seed": 0},
        },
        "supervision": {"mode": "per-sequence-all-or-none", "rate": 0.5, "seed": 0},
    })
