"""
YOLO-style ground-truth label files.

One object per line: "class cx cy w h", whitespace separated, the four
geometry fields normalized to [0, 1] by the image size. An optional header
comment carries the image identity and size:

    # image id=scene_000 width=1920 height=1080

Other lines starting with '#' and blank lines are ignored.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from loguru import logger

from core.errors import InputError, MalformedLine, OutOfRangeField, UnknownClassIndex
from core.evaluation import GroundTruth
from core.geometry import BBox
from reading.config import DEFAULT_CLASS_NAMES

FIELD_NAMES = ("center_x", "center_y", "width", "height")

_HEADER = re.compile(r"^#\s*image\s+id=(\S+)\s+width=(\d+)\s+height=(\d+)\s*$")


@dataclass(frozen=True)
class LabelEntry:
    class_index: int
    cx: float
    cy: float
    w: float
    h: float

    def to_bbox(self, image_width: float, image_height: float) -> BBox:
        return BBox.from_center_size(
            self.cx * image_width, self.cy * image_height, self.w * image_width, self.h * image_height
        )


@dataclass(frozen=True)
class LabelFile:
    image_id: str
    image_width: Optional[int]
    image_height: Optional[int]
    entries: Tuple[LabelEntry, ...] = ()

    def to_ground_truths(self, class_names: Sequence[str] = DEFAULT_CLASS_NAMES) -> List[GroundTruth]:
        if self.image_width is None or self.image_height is None:
            raise InputError(f"image size unknown for '{self.image_id}'; add a '# image' header")
        return [
            GroundTruth(class_names[e.class_index], e.to_bbox(self.image_width, self.image_height))
            for e in self.entries
        ]


def _parse_object_line(tokens: List[str], line_no: int, num_classes: int) -> LabelEntry:
    if len(tokens) != 5:
        raise MalformedLine(f"expected 5 fields 'class cx cy w h', got {len(tokens)}", location=f"line {line_no}")
    try:
        class_index = int(tokens[0])
    except ValueError:
        raise MalformedLine(f"class index {tokens[0]!r} is not an integer", location=f"line {line_no}")
    if not 0 <= class_index < num_classes:
        raise UnknownClassIndex(
            f"class index {class_index} outside [0, {num_classes})", location=f"line {line_no}"
        )

    values = []
    for name, token in zip(FIELD_NAMES, tokens[1:]):
        try:
            value = float(token)
        except ValueError:
            raise MalformedLine(f"{name} {token!r} is not a number", location=f"line {line_no}")
        if not math.isfinite(value):
            raise MalformedLine(f"{name} {token!r} is not finite", location=f"line {line_no}")
        if not 0.0 <= value <= 1.0:
            raise OutOfRangeField(f"{name} {value} outside [0, 1]", location=f"line {line_no}, field {name}")
        values.append(value)
    return LabelEntry(class_index, *values)


def parse_labels(
    text: str,
    class_names: Sequence[str] = DEFAULT_CLASS_NAMES,
    image_id: str = "image",
    image_size: Optional[Tuple[int, int]] = None,
) -> LabelFile:
    """Parse a label file; a header, when present, overrides image_id and image_size."""
    width, height = image_size if image_size else (None, None)
    entries = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            header = _HEADER.match(line)
            if header:
                image_id = header.group(1)
                width, height = int(header.group(2)), int(header.group(3))
                if width < 1 or height < 1:
                    raise MalformedLine("image size must be positive", location=f"line {line_no}")
            continue
        entries.append(_parse_object_line(line.split(), line_no, len(class_names)))
    return LabelFile(image_id=image_id, image_width=width, image_height=height, entries=tuple(entries))


def format_labels(labels: LabelFile) -> str:
    lines = []
    if labels.image_width is not None and labels.image_height is not None:
        lines.append(f"# image id={labels.image_id} width={labels.image_width} height={labels.image_height}")
    for e in labels.entries:
        lines.append(f"{e.class_index} {e.cx!r} {e.cy!r} {e.w!r} {e.h!r}")
    return "\n".join(lines) + ("\n" if lines else "")


def label_entry_from_bbox(class_index: int, box: BBox, image_width: int, image_height: int) -> LabelEntry:
    cx, cy, w, h = box.to_center_size()
    return LabelEntry(class_index, cx / image_width, cy / image_height, w / image_width, h / image_height)


def load_label_dir(path: str | Path, class_names: Sequence[str] = DEFAULT_CLASS_NAMES) -> Dict[str, LabelFile]:
    """Every *.txt in a directory; the file stem is the image id unless a header names one."""
    path = Path(path)
    if not path.is_dir():
        raise InputError("ground-truth directory not found", location=str(path))
    labels = {}
    for file in sorted(path.glob("*.txt")):
        try:
            parsed = parse_labels(file.read_text(encoding="utf-8"), class_names, image_id=file.stem)
        except InputError as e:
            e.location = f"{file.name}, {e.location}" if e.location else file.name
            raise
        labels[parsed.image_id] = parsed
    logger.debug(f"[📥] Loaded {len(labels)} label files from {path}")
    return labels
