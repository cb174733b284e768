"""
Training loop, evaluation, checkpoints and metrics.
"""

from .checkpoint import Checkpoint, LoopState, checkpoint_config_hash, load_checkpoint, restore, save_checkpoint
from .evaluation import EvalResult, evaluate, greedy_class_probs, topk_hits
from .loop import BEST_CHECKPOINT, LAST_CHECKPOINT, METRICS_FILE, StepResult, Trainer
from .metrics import MetricsWriter, read_metrics
from .optimizer import Adam, clip_grad_norm, grad_norm

__all__ = [
    "Adam",
    "BEST_CHECKPOINT",
    "Checkpoint",
    "EvalResult",
    "LAST_CHECKPOINT",
    "LoopState",
    "METRICS_FILE",
    "MetricsWriter",
    "StepResult",
    "Trainer",
    "checkpoint_config_hash",
    "clip_grad_norm",
    "evaluate",
    "grad_norm",
    "greedy_class_probs",
    "load_checkpoint",
    "read_metrics",
    "restore",
    "save_checkpoint",
    "topk_hits",
]
