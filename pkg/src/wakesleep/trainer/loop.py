"""
Alternating θ/φ training loop with periodic evaluation, checkpoints and early stopping.
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from wakesleep.base.exceptions import ContractViolation, NumericFault
from wakesleep.base.schemas import MetricRow, TrainConfig
from wakesleep.base.storage import PathLike
from wakesleep.core import GradientMap, Rng, backward
from wakesleep.data.dataset import SequenceDataset
from wakesleep.models.base import LatentVariableModel
from wakesleep.objectives.report import ObjectiveReport, compute_report

from .checkpoint import LoopState, load_checkpoint, restore, save_checkpoint
from .evaluation import EvalResult, evaluate
from .metrics import MetricsWriter
from .optimizer import Adam, clip_grad_norm

logger = logging.getLogger(__name__)

# top-level stream ids under the run seed
TRAIN_STREAM = 1
SHUFFLE_STREAM = 2
EVAL_STREAM = 3

LAST_CHECKPOINT = "last.wsar"
BEST_CHECKPOINT = "best.wsar"
METRICS_FILE = "metrics.jsonl"


@dataclass
class StepResult:
    """Outcome of one update; losses are the values before the update."""

    loss_p: float
    loss_phi: float
    ess_mean: float
    grad_norm_theta: float
    grad_norm_phi: float
    clipped: bool
    grads_theta: GradientMap = field(default_factory=dict, repr=False)
    grads_phi: GradientMap = field(default_factory=dict, repr=False)


@dataclass
class _Window:
    """Step results since the last evaluation."""

    results: List[StepResult] = field(default_factory=list)

    def mean(self, name: str) -> Optional[float]:
        values = [getattr(r, name) for r in self.results]
        if not values or not np.all(np.isfinite(values)):
            return None
        return float(np.mean(values))


def _audit(grads: GradientMap, prefix: str, loss_name: str) -> None:
    stray = [name for name in grads if not name.startswith(prefix)]
    if stray:
        raise ContractViolation(
            f"{loss_name} produced gradients outside {prefix}*: {stray[:3]}",
            details={"loss": loss_name, "leaves": stray},
        )


class Trainer:
    def __init__(self, model: LatentVariableModel, config: TrainConfig, out_dir: Optional[PathLike] = None):
        self.model = model
        self.config = config
        self.out_dir = Path(out_dir) if out_dir is not None else None
        betas = tuple(config.adam_betas)
        self.opt_theta = Adam(list(model.theta), lr=config.lr_theta, betas=betas, eps=config.adam_eps)
        self.opt_phi = Adam(list(model.phi), lr=config.lr_phi, betas=betas, eps=config.adam_eps)
        self.rng = Rng(config.seed)
        self.loop = LoopState()
        self.last_good_checkpoint: Optional[Path] = None
        self._window = _Window()

    @property
    def optimizers(self) -> Dict[str, Adam]:
        return {"theta": self.opt_theta, "phi": self.opt_phi}

    def _clip(self, params) -> tuple:
        norm, clipped = clip_grad_norm(params, self.config.grad_clip)
        if clipped:
            logger.warning(f"Clipped gradient norm {norm:.3g} to {self.config.grad_clip}")
        return norm, clipped

    def build_report(self, x: np.ndarray, labels: np.ndarray, rng: Rng) -> ObjectiveReport:
        cfg = self.config
        return compute_report(
            self.model,
            x,
            labels,
            objective=cfg.objective,
            K=cfg.K,
            alpha=cfg.alpha,
            rng=rng,
            ssws_term_scaling=cfg.ssws_term_scaling,
        )

    def train_step(self, x: np.ndarray, labels: np.ndarray, rng: Rng) -> StepResult:
        """
        θ descends loss_theta, then φ descends loss_phi on the same particles.
        A joint objective takes a single step for both.
        """
        try:
            self.model.zero_grad()
            report = self.build_report(x, labels, rng)
            loss_p = report.diagnostics.get("loss_p", -report.loss_theta.item())

            if report.joint:
                grads = backward(report.loss_theta, self.opt_theta.params + self.opt_phi.params)
                norm_theta, clipped_theta = self._clip(self.opt_theta.params)
                norm_phi, clipped_phi = self._clip(self.opt_phi.params)
                self.opt_theta.step()
                self.opt_phi.step()
                grads_theta = {k: v for k, v in grads.items() if k.startswith("theta.")}
                grads_phi = {k: v for k, v in grads.items() if k.startswith("phi.")}
            else:
                grads_theta = backward(report.loss_theta, self.opt_theta.params)
                _audit(grads_theta, "theta.", "loss_theta")
                norm_theta, clipped_theta = self._clip(self.opt_theta.params)
                self.opt_theta.step()
                self.model.zero_grad()

                grads_phi = backward(report.loss_phi, self.opt_phi.params)
                _audit(grads_phi, "phi.", "loss_phi")
                norm_phi, clipped_phi = self._clip(self.opt_phi.params)
                self.opt_phi.step()
        except NumericFault as e:
            checkpoint = str(self.last_good_checkpoint) if self.last_good_checkpoint else None
            logger.error(f"Numeric fault at step {self.loop.step}: {e.message}; last good checkpoint: {checkpoint}")
            raise NumericFault(
                f"{e.message} (step {self.loop.step})",
                op=e.op,
                checkpoint_path=checkpoint,
                details=e.details,
            ) from e

        self.loop.step += 1
        return StepResult(
            loss_p=float(loss_p),
            loss_phi=report.loss_phi.item(),
            ess_mean=float(report.diagnostics.get("ess_mean", float("nan"))),
            grad_norm_theta=norm_theta,
            grad_norm_phi=norm_phi,
            clipped=bool(clipped_theta or clipped_phi),
            grads_theta=grads_theta,
            grads_phi=grads_phi,
        )

    def training_set(self, dataset: SequenceDataset) -> SequenceDataset:
        """The supervised-only baseline never sees unlabeled sequences."""
        if self.config.objective == "iwae-supervised-baseline":
            labeled = dataset.labeled_indices()
            if labeled.size == 0:
                raise ContractViolation("iwae-supervised-baseline needs at least one labeled sequence")
            logger.info(f"Supervised-only baseline keeps {labeled.size} of {len(dataset)} sequences")
            return dataset.subset(labeled)
        return dataset

    def evaluate(self, val_set: SequenceDataset) -> EvalResult:
        cfg = self.config
        return evaluate(
            self.model,
            val_set,
            topk=cfg.eval_topk,
            K=cfg.eval_K,
            rng=self.rng.child(EVAL_STREAM, self.loop.step),
        )

    def _checkpoint(self, name: str) -> Optional[Path]:
        if self.out_dir is None:
            return None
        return save_checkpoint(self.out_dir / name, self.model, self.optimizers, self.loop, self.config)

    def resume(self, path: PathLike, allow_config_mismatch: bool = False) -> LoopState:
        checkpoint = load_checkpoint(path, self.config, allow_config_mismatch=allow_config_mismatch)
        self.loop = restore(checkpoint, self.model, self.optimizers)
        self.last_good_checkpoint = Path(path)
        logger.info(f"Resumed from {path} at step {self.loop.step} (epoch {self.loop.epoch}, batch {self.loop.batch})")
        return self.loop

    def _row(self, started: float, result: EvalResult) -> MetricRow:
        window = self._window
        return MetricRow(
            step=self.loop.step,
            epoch=self.loop.epoch,
            wall_time=time.time() - started,
            loss_p=window.mean("loss_p"),
            loss_phi=window.mean("loss_phi"),
            ess_mean=window.mean("ess_mean"),
            grad_norm_theta=window.mean("grad_norm_theta"),
            grad_norm_phi=window.mean("grad_norm_phi"),
            clipped=any(r.clipped for r in window.results),
            val_accuracy=result.accuracy,
            val_topk=result.topk,
            val_loss_p=result.loss_p,
        )

    def _eval_point(
        self, val_set: SequenceDataset, writer: Optional[MetricsWriter], started: float
    ) -> Tuple[MetricRow, bool]:
        """Evaluate, checkpoint, then log the row; the flag is set when early stopping triggers."""
        result = self.evaluate(val_set)
        loop = self.loop
        if result.accuracy > loop.best_accuracy:
            loop.best_accuracy, loop.best_step, loop.bad_evals = result.accuracy, loop.step, 0
            self._checkpoint(BEST_CHECKPOINT)
        else:
            loop.bad_evals += 1
        row = self._row(started, result)
        self._window = _Window()

        written = self._checkpoint(LAST_CHECKPOINT)
        if written is not None:
            self.last_good_checkpoint = written
        if writer is not None:
            writer.append(row)
        logger.info(
            f"step {loop.step} epoch {loop.epoch}: val_accuracy={result.accuracy:.4f} "
            f"loss_p={row.loss_p} (best {loop.best_accuracy:.4f} at step {loop.best_step})"
        )
        if loop.bad_evals >= self.config.patience:
            logger.info(f"Early stopping after {loop.bad_evals} evaluations without improvement")
            return row, True
        return row, False

    def fit(self, train_set: SequenceDataset, val_set: SequenceDataset) -> List[MetricRow]:
        """Train until the epoch budget, ``max_steps`` or early stopping; returns the rows logged by this call."""
        cfg = self.config
        train_set = self.training_set(train_set)
        writer = MetricsWriter(self.out_dir / METRICS_FILE) if self.out_dir is not None else None
        rows: List[MetricRow] = []
        started = time.time()
        stop = cfg.max_steps is not None and self.loop.step >= cfg.max_steps

        while self.loop.epoch < cfg.epochs and not stop:
            epoch = self.loop.epoch
            order = self.rng.child(SHUFFLE_STREAM, epoch)
            batches = list(train_set.batches(cfg.batch_size, order))
            logger.info(f"Epoch {epoch}: {len(batches)} batches")
            for batch_index in range(self.loop.batch, len(batches)):
                _, x, labels = batches[batch_index]
                result = self.train_step(x, labels, self.rng.child(TRAIN_STREAM, epoch, batch_index))
                self._window.results.append(result)
                self.loop.batch = batch_index + 1
                at_end = cfg.max_steps is not None and self.loop.step >= cfg.max_steps
                if self.loop.step % cfg.eval_every == 0 or at_end:
                    row, stop = self._eval_point(val_set, writer, started)
                    rows.append(row)
                    stop = stop or at_end
                if stop:
                    break
            if not stop:
                self.loop.epoch += 1
                self.loop.batch = 0

        if self._window.results:
            row, _ = self._eval_point(val_set, writer, started)
            rows.append(row)
        return rows
