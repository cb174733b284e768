"""
Implementations behind each CLI command.

Each command takes an already-validated config plus its own arguments and
returns a JSON-serializable summary; exit codes are decided in ``main``.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from wakesleep.base.exceptions import ConfigurationError, ContractViolation
from wakesleep.base.schemas import TrainConfig
from wakesleep.base.storage import PathLike, atomic_write_bytes, config_digest
from wakesleep.core import Rng
from wakesleep.data import (
    HmmSpec,
    SequenceDataset,
    apply_supervision,
    fetch_mnist,
    gen_hmm,
    load_dataset,
    load_mnist_idx,
    save_dataset,
    subsample_labels,
)
from wakesleep.data.download import MNIST_FILES, default_data_dir
from wakesleep.models import EnumerableToy, LatentVariableModel, build_model, continue_sequence
from wakesleep.trainer import Trainer, evaluate, load_checkpoint, restore

from . import diagnostics, plots

logger = logging.getLogger(__name__)

# stream ids under the run seed
MODEL_INIT_STREAM = 0
EVAL_STREAM = 3
SAMPLE_STREAM = 4

# stream ids under the dataset seed
HMM_TRAIN_STREAM = 1
HMM_VAL_STREAM = 2
TOY_MODEL_STREAM = 3
TOY_DATA_STREAM = 4

TRAIN_FILE = "train.wsar"
VAL_FILE = "val.wsar"


def _mnist_path(data_dir: Path, filename: str) -> Path:
    """Prefer the archive name as published; fall back to the uncompressed file."""
    candidates = [data_dir / filename, data_dir / filename.removesuffix(".gz")]
    for candidate in candidates:
        if candidate.exists():
            return candidate
    raise ConfigurationError(
        f"MNIST file {filename} not found in {data_dir}; set dataset.download=true or WAKESLEEP_DATA_DIR",
        details={"data_dir": str(data_dir), "file": filename},
    )


def _mnist_datasets(config: TrainConfig) -> Tuple[SequenceDataset, SequenceDataset]:
    spec = config.dataset
    data_dir = Path(spec.data_dir) if spec.data_dir else default_data_dir()
    if spec.download:
        fetch_mnist(data_dir)
    full = load_mnist_idx(
        _mnist_path(data_dir, MNIST_FILES["train_images"]),
        _mnist_path(data_dir, MNIST_FILES["train_labels"]),
    )
    if spec.train_size >= len(full):
        raise ConfigurationError(
            f"train_size {spec.train_size} leaves no validation images out of {len(full)}"
        )
    train = full.subset(np.arange(spec.train_size))
    val = full.subset(np.arange(spec.train_size, len(full)))
    train = subsample_labels(train, spec.n_labeled, seed=config.supervision.seed, balanced=spec.balanced)
    return train, val


def _hmm_datasets(config: TrainConfig) -> Tuple[SequenceDataset, SequenceDataset]:
    spec = config.dataset
    data_rng = Rng(spec.hmm.seed)
    train = gen_hmm(HmmSpec.from_config(spec.hmm, spec.length, spec.train_count), data_rng.child(HMM_TRAIN_STREAM))
    val = gen_hmm(HmmSpec.from_config(spec.hmm, spec.length, spec.val_count), data_rng.child(HMM_VAL_STREAM))
    return apply_supervision(train, config.supervision), val


def _toy_datasets(config: TrainConfig) -> Tuple[SequenceDataset, SequenceDataset]:
    """Sequences drawn from a fixed random toy HMM seeded by ``dataset.hmm.seed``."""
    spec, model = config.dataset, config.model
    data_rng = Rng(spec.hmm.seed)
    truth_model = EnumerableToy.random(
        data_rng.child(TOY_MODEL_STREAM),
        num_classes=model.num_classes,
        alphabet_size=model.alphabet_size,
        max_length=model.max_length,
    )
    split_rng = data_rng.child(TOY_DATA_STREAM)
    datasets = []
    for split, count in enumerate((spec.train_count, spec.val_count)):
        x, y = truth_model.sample_sequences(count, spec.length, split_rng.child(split))
        datasets.append(SequenceDataset(x, y, num_classes=model.num_classes))
    return apply_supervision(datasets[0], config.supervision), datasets[1]


def build_datasets(config: TrainConfig) -> Tuple[SequenceDataset, SequenceDataset]:
    """(train, val) as configured; ``dataset.path`` points at a ``gen-data`` output directory."""
    if config.dataset.path:
        root = Path(config.dataset.path)
        train, _ = load_dataset(root / TRAIN_FILE)
        val, _ = load_dataset(root / VAL_FILE)
    elif config.dataset.kind == "mnist":
        train, val = _mnist_datasets(config)
    elif config.dataset.kind == "hmm":
        train, val = _hmm_datasets(config)
    else:
        train, val = _toy_datasets(config)
    check_model_fits(config, train)
    return train, val


def check_model_fits(config: TrainConfig, dataset: SequenceDataset) -> None:
    model = config.model
    if model.kind != "toy" and dataset.obs_dim != model.obs_dim:
        raise ConfigurationError(
            f"model.obs_dim={model.obs_dim} but the data has {dataset.obs_dim} dimensions"
        )
    if dataset.num_classes != model.num_classes:
        raise ConfigurationError(
            f"model.num_classes={model.num_classes} but the data has {dataset.num_classes} classes"
        )


def build_run_model(config: TrainConfig) -> LatentVariableModel:
    return build_model(config.model, Rng(config.seed).child(MODEL_INIT_STREAM))


def gen_data(config: TrainConfig, out_dir: PathLike) -> Dict[str, Any]:
    out_dir = Path(out_dir)
    train, val = build_datasets(config)
    meta = {"config_hash": config_digest(config.dataset)}
    save_dataset(out_dir / TRAIN_FILE, train, meta)
    save_dataset(out_dir / VAL_FILE, val, meta)
    return {
        "train": str(out_dir / TRAIN_FILE),
        "val": str(out_dir / VAL_FILE),
        "train_sequences": len(train),
        "val_sequences": len(val),
        "supervision_rate": train.supervision_rate,
    }


def train(
    config: TrainConfig,
    out_dir: PathLike,
    resume: Optional[PathLike] = None,
    allow_config_mismatch: bool = False,
) -> Dict[str, Any]:
    train_set, val_set = build_datasets(config)
    model = build_run_model(config)
    trainer = Trainer(model, config, out_dir)
    if resume is not None:
        trainer.resume(resume, allow_config_mismatch=allow_config_mismatch)
    rows = trainer.fit(train_set, val_set)
    summary: Dict[str, Any] = {
        "steps": trainer.loop.step,
        "best_accuracy": trainer.loop.best_accuracy,
        "best_step": trainer.loop.best_step,
    }
    if rows:
        summary["final"] = rows[-1].model_dump()
    return summary


def _restored_model(config: TrainConfig, checkpoint: PathLike, allow_config_mismatch: bool):
    model = build_model(config.model.model_copy(update={"zero_init": True}))
    restore(load_checkpoint(checkpoint, config, allow_config_mismatch=allow_config_mismatch), model)
    return model


def eval_checkpoint(
    config: TrainConfig, checkpoint: PathLike, out_dir: PathLike, allow_config_mismatch: bool = False
) -> Dict[str, Any]:
    _, val_set = build_datasets(config)
    model = _restored_model(config, checkpoint, allow_config_mismatch)
    result = evaluate(model, val_set, topk=config.eval_topk, K=config.eval_K, rng=Rng(config.seed).child(EVAL_STREAM))
    summary = {
        "checkpoint": str(checkpoint),
        "accuracy": result.accuracy,
        "topk": result.topk,
        "loss_p": result.loss_p,
        "n_labels": result.n_labels,
    }
    atomic_write_bytes(Path(out_dir) / "eval.json", json.dumps(summary, indent=2, sort_keys=True).encode("utf-8"))
    return summary


def sample(
    config: TrainConfig,
    checkpoint: PathLike,
    out_dir: PathLike,
    n_steps: int = 200,
    prefix_length: int = 10,
    index: int = 0,
    allow_config_mismatch: bool = False,
) -> Dict[str, Any]:
    """Continue validation sequence ``index`` after its first ``prefix_length`` ground-truth steps."""
    _, val_set = build_datasets(config)
    if not 0 <= index < len(val_set):
        raise ContractViolation(f"Sequence index {index} outside [0, {len(val_set)})")
    prefix_length = min(prefix_length, val_set.length)
    model = _restored_model(config, checkpoint, allow_config_mismatch)
    x_prefix = val_set.x[index, :prefix_length]
    labels_prefix = val_set.truth[index, :prefix_length]
    continuation = continue_sequence(model, x_prefix, labels_prefix, n_steps, Rng(config.seed).child(SAMPLE_STREAM, index))

    lines: List[str] = []
    for t in range(prefix_length):
        lines.append(json.dumps({"t": t, "phase": "prefix", "y": int(continuation.prefix_y[t]), "x": x_prefix[t].tolist()}))
    for t in range(n_steps):
        lines.append(
            json.dumps(
                {
                    "t": prefix_length + t,
                    "phase": "sample",
                    "y": int(continuation.y[t]),
                    "x": continuation.x[t].tolist(),
                    "log_p": float(continuation.step_log_p[t]),
                }
            )
        )
    path = Path(out_dir) / "continuation.jsonl"
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))
    return {
        "path": str(path),
        "prefix_length": prefix_length,
        "n_steps": n_steps,
        "total_log_p": float(np.sum(continuation.step_log_p)),
    }


def diagnose(
    config: TrainConfig,
    out_dir: PathLike,
    ks: Sequence[int] = diagnostics.DEFAULT_KS,
    n_sets: int = 1000,
    n_batches: int = 100,
    labeled_steps: Sequence[int] = (),
) -> Dict[str, Any]:
    report = diagnostics.diagnose(config, ks=ks, n_sets=n_sets, n_batches=n_batches, labeled_steps=labeled_steps)
    written = diagnostics.write_report(out_dir, report)
    return {name: str(path) for name, path in written.items()}


def emit_plots(metrics_files: Sequence[PathLike], out_dir: PathLike, names: Optional[Sequence[str]] = None) -> Dict[str, Any]:
    records, skipped = plots.collect_records(metrics_files, names)
    path = plots.write_long_csv(Path(out_dir) / "plot_data.csv", records)
    return {"path": str(path), "records": len(records), "skipped_lines": skipped}
