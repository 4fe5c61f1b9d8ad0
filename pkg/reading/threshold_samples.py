"""
Threshold samples: CSV with the exact header "threshold,dangerous,safe",
one row per distinct threshold (meters) with two non-negative integer counts.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import List, Sequence

from loguru import logger

from core.errors import DuplicateThreshold, InputError, MalformedRow
from core.warning import ThresholdSample

HEADER = ["threshold", "dangerous", "safe"]


def _count(token: str, name: str, line_no: int) -> int:
    try:
        value = int(token)
    except ValueError:
        raise MalformedRow(f"{name} {token!r} is not an integer", location=f"line {line_no}")
    if value < 0:
        raise MalformedRow(f"{name} {value} is negative", location=f"line {line_no}")
    return value


def parse_threshold_samples(text: str) -> List[ThresholdSample]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != HEADER:
        raise MalformedRow(f"header must be '{','.join(HEADER)}'", location="line 1")

    samples = []
    seen = {}
    for line_no, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise MalformedRow(f"expected 3 columns, got {len(row)}", location=f"line {line_no}")
        try:
            threshold = float(row[0])
        except ValueError:
            raise MalformedRow(f"threshold {row[0]!r} is not a number", location=f"line {line_no}")
        if not math.isfinite(threshold) or threshold <= 0:
            raise MalformedRow(f"threshold {row[0]!r} must be positive", location=f"line {line_no}")
        if threshold in seen:
            raise DuplicateThreshold(
                f"threshold {threshold:g} already given on line {seen[threshold]}", location=f"line {line_no}"
            )
        seen[threshold] = line_no
        samples.append(
            ThresholdSample(
                threshold_m=threshold,
                dangerous_count=_count(row[1].strip(), "dangerous", line_no),
                safe_count=_count(row[2].strip(), "safe", line_no),
            )
        )
    return samples


def format_threshold_samples(samples: Sequence[ThresholdSample]) -> str:
    lines = [",".join(HEADER)]
    lines += [f"{s.threshold_m!r},{s.dangerous_count},{s.safe_count}" for s in samples]
    return "\n".join(lines) + "\n"


def load_threshold_samples(path: str | Path) -> List[ThresholdSample]:
    path = Path(path)
    if not path.exists():
        raise InputError("threshold samples file not found", location=str(path))
    samples = parse_threshold_samples(path.read_text(encoding="utf-8"))
    logger.debug(f"[📥] Loaded {len(samples)} threshold samples from {path}")
    return samples
