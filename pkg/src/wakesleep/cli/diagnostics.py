"""
Estimator diagnostics on an enumerable toy.

Compares sampled φ-gradient estimators against their exact counterparts
(bias and variance over many independent particle sets) and measures how
much the per-batch φ-loss swings under all-or-none supervision.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from wakesleep.base.exceptions import ContractViolation
from wakesleep.base.schemas import EstimatorRow, InstabilityRow, SupervisionSpec, TrainConfig
from wakesleep.base.storage import PathLike
from wakesleep.core import GradNode, Rng, backward
from wakesleep.data.supervision import supervision_mask
from wakesleep.models.toy import EnumerableToy
from wakesleep.objectives.reinforce import reinforce_surrogate
from wakesleep.objectives.wake import loss_q_cws, loss_q_ssws, loss_s
from wakesleep.oracle import exact_elbo_phi_gradient, exact_phi_gradient
from wakesleep.particles import ParticleSet, sample_particles

logger = logging.getLogger(__name__)

DEFAULT_KS = (2, 5, 10, 25)
ESTIMATORS = ("reinforce", "ssws", "cws")

# stream ids under the run seed
MODEL_STREAM = 0
SEQUENCE_STREAM = 1
PARTICLE_STREAM = 2
INSTABILITY_STREAM = 3

_LOSSES: Dict[str, Callable[[ParticleSet], GradNode]] = {
    "reinforce": reinforce_surrogate,
    "ssws": loss_q_ssws,
    "cws": loss_q_cws,
}


@dataclass
class DiagnosticsReport:
    estimators: List[EstimatorRow]
    instability: List[InstabilityRow]


def _flat(toy: EnumerableToy, grads: Dict[str, np.ndarray]) -> np.ndarray:
    return np.concatenate([np.ravel(grads.get(node.name, np.zeros_like(node.value))) for node in toy.phi])


def oracle_targets(toy: EnumerableToy, x: np.ndarray, labels: np.ndarray) -> Dict[str, np.ndarray]:
    """Exact gradient each estimator is unbiased or consistent for, flattened over φ."""
    return {
        "reinforce": -_flat(toy, exact_elbo_phi_gradient(toy, x, labels)),
        "ssws": _flat(toy, exact_phi_gradient(toy, x, labels)),
        "cws": _flat(toy, exact_phi_gradient(toy, x, labels, include_supervised=True)),
    }


def sample_estimates(
    toy: EnumerableToy, x: np.ndarray, labels: np.ndarray, K: int, n_sets: int, rng: Rng
) -> Dict[str, np.ndarray]:
    """[n_sets, |φ|] gradient estimates per estimator; all estimators share each particle set."""
    estimates = {name: np.zeros((n_sets, sum(node.value.size for node in toy.phi))) for name in ESTIMATORS}
    for i in range(n_sets):
        pset = sample_particles(toy, x[None], labels[None], K, rng.child(i))
        for name in ESTIMATORS:
            toy.zero_grad()
            estimates[name][i] = _flat(toy, backward(_LOSSES[name](pset)))
    toy.zero_grad()
    return estimates


def estimator_table(
    toy: EnumerableToy,
    x: np.ndarray,
    labels: np.ndarray,
    rng: Rng,
    ks: Sequence[int] = DEFAULT_KS,
    n_sets: int = 1000,
) -> List[EstimatorRow]:
    if n_sets < 2:
        raise ContractViolation(f"n_sets must be >= 2 to estimate a variance, got {n_sets}")
    targets = oracle_targets(toy, x, labels)
    rows: List[EstimatorRow] = []
    for K in ks:
        if K < 2:
            raise ContractViolation(f"The leave-one-out baseline needs K >= 2, got K={K}")
        estimates = sample_estimates(toy, x, labels, K, n_sets, rng.child(K))
        for name in ESTIMATORS:
            sample = estimates[name]
            rows.append(
                EstimatorRow(
                    estimator=name,
                    K=K,
                    n_sets=n_sets,
                    bias=float(np.linalg.norm(sample.mean(axis=0) - targets[name])),
                    variance=float(np.sum(sample.var(axis=0, ddof=1))),
                    oracle_norm=float(np.linalg.norm(targets[name])),
                )
            )
        logger.info(f"Estimator diagnostics done for K={K}")
    return rows


def _coefficient_of_variation(values: np.ndarray) -> Tuple[float, float, float]:
    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1))
    return mean, std, std / abs(mean) if mean != 0.0 else float("inf")


def instability_witness(
    toy: EnumerableToy,
    length: int,
    batch_size: int,
    K: int,
    alpha: float,
    rng: Rng,
    n_batches: int = 100,
    rate: float = 0.5,
) -> List[InstabilityRow]:
    """
    Per-batch φ-loss spread of SSWS (L_q - α·L_s) and CWS over batches mixing
    fully labeled and unlabeled sequences, evaluated on shared particles.
    """
    if n_batches < 2:
        raise ContractViolation(f"n_batches must be >= 2, got {n_batches}")
    ssws_values = np.zeros(n_batches)
    cws_values = np.zeros(n_batches)
    for i in range(n_batches):
        batch_rng = rng.child(i)
        x, truth = toy.sample_sequences(batch_size, length, batch_rng.child(0))
        spec = SupervisionSpec(mode="per-sequence-all-or-none", rate=rate, seed=int(batch_rng.integers(0, 2**31)))
        labels = np.where(supervision_mask(truth.shape, spec), truth, -1)
        pset = sample_particles(toy, x, labels, K, batch_rng.child(1))
        ssws_values[i] = (loss_q_ssws(pset) - alpha * loss_s(pset)).item()
        cws_values[i] = loss_q_cws(pset).item()

    rows = []
    for name, values in (("ssws", ssws_values), ("cws", cws_values)):
        mean, std, cv = _coefficient_of_variation(values)
        rows.append(
            InstabilityRow(
                estimator=name,
                n_batches=n_batches,
                mean_loss=mean,
                std_loss=std,
                coefficient_of_variation=cv,
            )
        )
    logger.info(
        f"φ-loss coefficient of variation: ssws={rows[0].coefficient_of_variation:.3f} "
        f"cws={rows[1].coefficient_of_variation:.3f}"
    )
    return rows


def diagnose(
    config: TrainConfig,
    ks: Sequence[int] = DEFAULT_KS,
    n_sets: int = 1000,
    n_batches: int = 100,
    labeled_steps: Sequence[int] = (),
):
    """
    Run both diagnostics for a toy config. The estimator table uses one
    sequence drawn from the seed, labeled at ``labeled_steps`` only; the
    instability witness uses all-or-none supervision at ``supervision.rate``.
    """
    if config.model.kind != "toy":
        raise ContractViolation(
            f"diagnose needs an enumerable model (model.kind='toy'), got '{config.model.kind}'"
        )
    rng = Rng(config.seed)
    toy = EnumerableToy.random(
        rng.child(MODEL_STREAM),
        num_classes=config.model.num_classes,
        alphabet_size=config.model.alphabet_size,
        max_length=config.model.max_length,
    )
    length = min(config.dataset.length, config.model.max_length)
    x, truth = toy.sample_sequences(1, length, rng.child(SEQUENCE_STREAM))
    labels = np.full(length, -1, dtype=np.int64)
    for t in labeled_steps:
        if not 0 <= t < length:
            raise ContractViolation(f"Labeled step {t} outside [0, {length})")
        labels[t] = truth[0, t]
    logger.info(f"Diagnosing on a length-{length} sequence with {len(set(labeled_steps))} labeled steps")

    estimators = estimator_table(toy, x[0], labels, rng.child(PARTICLE_STREAM), ks=ks, n_sets=n_sets)
    instability = instability_witness(
        toy,
        length=length,
        batch_size=config.batch_size,
        K=config.K,
        alpha=config.alpha,
        rng=rng.child(INSTABILITY_STREAM),
        n_batches=n_batches,
        rate=config.supervision.rate,
    )
    return DiagnosticsReport(estimators=estimators, instability=instability)


def write_report(out_dir: PathLike, report: DiagnosticsReport) -> Dict[str, Path]:
    """JSON-lines and CSV copies of both tables."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: Dict[str, Path] = {}
    for name, rows, schema in (
        ("estimators", report.estimators, EstimatorRow),
        ("instability", report.instability, InstabilityRow),
    ):
        jsonl = out_dir / f"{name}.jsonl"
        with open(jsonl, "w", encoding="utf-8") as handle:
            for row in rows:
                handle.write(row.model_dump_json() + "\n")
        table = out_dir / f"{name}.csv"
        columns = list(schema.model_fields)
        with open(table, "w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=columns)
            writer.writeheader()
            for row in rows:
                writer.writerow(row.model_dump())
        written[f"{name}_jsonl"] = jsonl
        written[f"{name}_csv"] = table
    logger.info(f"Diagnostics written to {out_dir}")
    return written
