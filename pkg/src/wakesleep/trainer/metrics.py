"""
Append-only JSON-lines metrics file.
"""

import json
import logging
from pathlib import Path
from typing import Iterator, List, Optional, Tuple

from pydantic import ValidationError

from wakesleep.base.exceptions import ContractViolation
from wakesleep.base.schemas import MetricRow
from wakesleep.base.storage import PathLike

logger = logging.getLogger(__name__)


class MetricsWriter:
    """Appends one MetricRow per line; steps must increase."""

    def __init__(self, path: PathLike):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.last_step: Optional[int] = None
        if self.path.exists():
            rows, _ = read_metrics(self.path)
            if rows:
                self.last_step = rows[-1].step

    def append(self, row: MetricRow) -> None:
        if self.last_step is not None and row.step <= self.last_step:
            raise ContractViolation(
                f"Metric step {row.step} does not follow step {self.last_step}",
                details={"step": row.step, "last_step": self.last_step},
            )
        with open(self.path, "a", encoding="utf-8") as handle:
            handle.write(row.model_dump_json() + "\n")
            handle.flush()
        self.last_step = row.step


def iter_metric_lines(path: PathLike) -> Iterator[Tuple[int, Optional[MetricRow]]]:
    """(line number, row) pairs; row is None for a corrupt line."""
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, MetricRow.model_validate(json.loads(line))
            except (json.JSONDecodeError, ValidationError):
                yield lineno, None


def read_metrics(path: PathLike) -> Tuple[List[MetricRow], int]:
    """Parse a metrics file, skipping corrupt lines; returns (rows, number skipped)."""
    rows: List[MetricRow] = []
    skipped = 0
    for lineno, row in iter_metric_lines(path):
        if row is None:
            skipped += 1
            logger.warning(f"Skipping corrupt metrics line {path}:{lineno}")
            continue
        rows.append(row)
    return rows, skipped
