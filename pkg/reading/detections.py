"""
Detection dumps: a JSON array of records

    {"image_id": str, "class": str | int, "bbox": [x_min, y_min, x_max, y_max], "confidence": float}

An integer class is an index into the configured class names; an index with
no name is kept as its decimal string so later stages can report it.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Dict, List, Sequence

from loguru import logger

from core.errors import InputError, InvalidBox, SchemaError
from core.evaluation import Detection
from core.geometry import BBox
from reading.config import DEFAULT_CLASS_NAMES

DetectionBatch = Dict[str, List[Detection]]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"expected a number, got {value!r}", location=path)
    try:
        number = float(value)
    except OverflowError:
        number = math.inf
    if not math.isfinite(number):
        raise SchemaError(f"expected a finite number, got {value!r}", location=path)
    return number


def _class_label(value, path: str, class_names: Sequence[str]) -> str:
    if isinstance(value, bool):
        raise SchemaError(f"expected a class name or index, got {value!r}", location=path)
    if isinstance(value, int):
        return class_names[value] if 0 <= value < len(class_names) else str(value)
    if isinstance(value, str) and value:
        return value
    raise SchemaError(f"expected a class name or index, got {value!r}", location=path)


def _parse_record(record, k: int, class_names: Sequence[str]) -> tuple:
    path = f"$[{k}]"
    if not isinstance(record, dict):
        raise SchemaError("expected an object", location=path)
    for key in ("image_id", "class", "bbox", "confidence"):
        if key not in record:
            raise SchemaError(f"missing field '{key}'", location=path)

    image_id = record["image_id"]
    if isinstance(image_id, bool) or not isinstance(image_id, (str, int)):
        raise SchemaError(f"expected a string, got {image_id!r}", location=f"{path}.image_id")

    bbox = record["bbox"]
    if not isinstance(bbox, list) or len(bbox) != 4:
        raise SchemaError("expected [x_min, y_min, x_max, y_max]", location=f"{path}.bbox")
    coords = [_number(v, f"{path}.bbox[{i}]") for i, v in enumerate(bbox)]
    try:
        box = BBox(*coords)
    except InvalidBox as e:
        raise InvalidBox(e.message, location=f"{path}.bbox") from e

    confidence = _number(record["confidence"], f"{path}.confidence")
    if not 0.0 <= confidence <= 1.0:
        raise SchemaError(f"confidence {confidence} outside [0, 1]", location=f"{path}.confidence")

    label = _class_label(record["class"], f"{path}.class", class_names)
    return str(image_id), Detection(label, box, confidence)


def parse_detections(text: str, class_names: Sequence[str] = DEFAULT_CLASS_NAMES) -> DetectionBatch:
    """Validated detections grouped by image id, first-seen image order, input order within an image."""
    try:
        raw = json.loads(text) if text.strip() else []
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e.msg}", location=f"line {e.lineno}") from e
    if not isinstance(raw, list):
        raise SchemaError("expected a JSON array of detection records", location="$")

    grouped: DetectionBatch = {}
    for k, record in enumerate(raw):
        image_id, det = _parse_record(record, k, class_names)
        grouped.setdefault(image_id, []).append(det)
    return grouped


def detections_to_records(batch: DetectionBatch) -> List[dict]:
    return [
        {
            "image_id": image_id,
            "class": det.class_label,
            "bbox": det.box.as_list(),
            "confidence": det.confidence,
        }
        for image_id, dets in batch.items()
        for det in dets
    ]


def format_detections(batch: DetectionBatch) -> str:
    return json.dumps(detections_to_records(batch), indent=2) + "\n"


def load_detections(path: str | Path, class_names: Sequence[str] = DEFAULT_CLASS_NAMES) -> DetectionBatch:
    path = Path(path)
    if not path.exists():
        raise InputError("detections file not found", location=str(path))
    try:
        batch = parse_detections(path.read_text(encoding="utf-8"), class_names)
    except InputError as e:
        e.location = f"{path.name}, {e.location}" if e.location else path.name
        raise
    count = sum(len(d) for d in batch.values())
    logger.debug(f"[📥] Loaded {count} detections over {len(batch)} images from {path}")
    return batch
