"""
Long-format plot data from one or more metrics files.

Every numeric metric of every row becomes one ``(run, step, metric, value)``
record; rendering is left to whatever tool reads the CSV.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

from wakesleep.base.exceptions import ContractViolation
from wakesleep.base.schemas import MetricRow
from wakesleep.base.storage import PathLike
from wakesleep.trainer.metrics import read_metrics

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("run", "step", "metric", "value")
SKIPPED_FIELDS = {"step", "val_topk"}


@dataclass(frozen=True)
class PlotRecord:
    run: str
    step: int
    metric: str
    value: float


def run_names(paths: Sequence[PathLike]) -> List[str]:
    """Run label per file: the parent directory for ``metrics.jsonl``, else the stem; duplicates get a suffix."""
    names: List[str] = []
    for path in paths:
        path = Path(path)
        base = path.parent.name if path.name == "metrics.jsonl" and path.parent.name else path.stem
        name, suffix = base, 1
        while name in names:
            suffix += 1
            name = f"{base}-{suffix}"
        names.append(name)
    return names


def row_records(run: str, row: MetricRow) -> Iterable[PlotRecord]:
    for name, value in row.model_dump().items():
        if name in SKIPPED_FIELDS or value is None:
            continue
        yield PlotRecord(run, row.step, name, float(value))
    for name, value in sorted((row.val_topk or {}).items()):
        yield PlotRecord(run, row.step, f"val_{name}", float(value))


def collect_records(
    paths: Sequence[PathLike], names: Optional[Sequence[str]] = None
) -> Tuple[List[PlotRecord], int]:
    """Records of every run in order, and the number of corrupt lines skipped."""
    if not paths:
        raise ContractViolation("emit-plots needs at least one metrics file")
    names = list(names) if names is not None else run_names(paths)
    if len(names) != len(paths):
        raise ContractViolation(f"{len(names)} run names for {len(paths)} metrics files")
    records: List[PlotRecord] = []
    skipped_total = 0
    for run, path in zip(names, paths):
        rows, skipped = read_metrics(path)
        skipped_total += skipped
        for row in rows:
            records.extend(row_records(run, row))
    if skipped_total:
        logger.warning(f"Skipped {skipped_total} corrupt metrics lines")
    return records, skipped_total


def write_long_csv(path: PathLike, records: Sequence[PlotRecord]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)
        for record in records:
            # repr keeps every float bit-exact on the way back in
            writer.writerow([record.run, record.step, record.metric, repr(record.value)])
    logger.info(f"Wrote {len(records)} plot records to {path}")
    return path


def read_long_csv(path: PathLike) -> List[PlotRecord]:
    with open(path, "r", newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ContractViolation(f"{path} does not have columns {CSV_COLUMNS}")
        return [
            PlotRecord(row["run"], int(row["step"]), row["metric"], float(row["value"]))
            for row in reader
        ]
