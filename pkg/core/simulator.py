"""
Synthetic pinhole-camera scenes.

Objects of known class, size and distance are projected forward through
w_img = f * w_obj / D and written out in the ingestion formats, so the
distance and warning stages can be checked against the true distances.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from loguru import logger

from core.errors import BehindCamera, NonPositiveInput, UnknownClass
from core.evaluation import Detection
from core.geometry import BBox
from reading.config import DEFAULT_CLASS_NAMES
from reading.detections import format_detections
from reading.labels import LabelFile, format_labels, label_entry_from_bbox

# noisy widths never drop below this
MIN_PIXEL_WIDTH = 1e-3


def _positive(name: str, value: float) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise NonPositiveInput(f"{name} must be a number, got {value!r}")
    try:
        number = float(value)
    except OverflowError:
        number = math.inf
    if not math.isfinite(number) or number <= 0:
        raise NonPositiveInput(f"{name} must be positive, got {value!r}")
    return number


@dataclass(frozen=True)
class SceneObject:
    class_label: str
    real_width_m: float
    real_height_m: float
    distance_m: float
    lateral_offset_m: float = 0.0

    def __post_init__(self):
        _positive("real_width_m", self.real_width_m)
        _positive("real_height_m", self.real_height_m)


@dataclass(frozen=True)
class SceneSpec:
    focal_length_px: float
    image_width_px: int
    image_height_px: int
    objects: Tuple[SceneObject, ...] = ()
    noise_std_px: float = 0.0
    image_id: str = "scene"

    def __post_init__(self):
        _positive("focal_length_px", self.focal_length_px)
        _positive("image_width_px", self.image_width_px)
        _positive("image_height_px", self.image_height_px)
        if not math.isfinite(self.noise_std_px) or self.noise_std_px < 0:
            raise NonPositiveInput(f"noise_std_px must be >= 0, got {self.noise_std_px}")
        object.__setattr__(self, "objects", tuple(self.objects))


@dataclass(frozen=True)
class Projection:
    box: BBox
    clamped: bool
    unclamped: BBox


@dataclass(frozen=True)
class TruthRow:
    index: int
    class_label: str
    distance_m: float
    pixel_width: float
    clamped: bool


@dataclass(frozen=True)
class SceneOutput:
    labels_text: str
    detections_text: str
    truth: Tuple[TruthRow, ...]

    @property
    def truth_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["index", "class", "distance_m", "pixel_width", "clamped"])
        for row in self.truth:
            writer.writerow([row.index, row.class_label, repr(row.distance_m), repr(row.pixel_width), int(row.clamped)])
        return buf.getvalue()


def project(spec: SceneSpec, obj: SceneObject) -> Projection:
    """Forward pinhole projection, clamped to the image with a flag when it had to be."""
    if not obj.distance_m > 0:
        raise BehindCamera(f"object '{obj.class_label}' at {obj.distance_m} m is not in front of the camera")

    f = spec.focal_length_px
    width = f * obj.real_width_m / obj.distance_m
    height = f * obj.real_height_m / obj.distance_m
    cx = spec.image_width_px / 2 + f * obj.lateral_offset_m / obj.distance_m
    cy = spec.image_height_px / 2
    raw = BBox.from_center_size(cx, cy, width, height)

    clamped = (
        raw.x_min < 0 or raw.y_min < 0 or raw.x_max > spec.image_width_px or raw.y_max > spec.image_height_px
    )
    if not clamped:
        return Projection(box=raw, clamped=False, unclamped=raw)

    def clip(v: float, hi: float) -> float:
        return min(max(v, 0.0), float(hi))

    box = BBox(
        clip(raw.x_min, spec.image_width_px),
        clip(raw.y_min, spec.image_height_px),
        clip(raw.x_max, spec.image_width_px),
        clip(raw.y_max, spec.image_height_px),
    )
    return Projection(box=box, clamped=True, unclamped=raw)


def _with_width(box: BBox, width: float) -> BBox:
    """Same center and rows, new width; x_max - x_min is never below `width`."""
    x_min = box.center[0] - width / 2
    x_max = x_min + width
    while x_max - x_min < width:
        x_max = math.nextafter(x_max, math.inf)
    return BBox(x_min, box.y_min, x_max, box.y_max)


def generate(spec: SceneSpec, seed: int = 0, class_names: Sequence[str] = DEFAULT_CLASS_NAMES) -> SceneOutput:
    """
    Label text, detection text and the truth table for one scene.

    Detections are the projections with seeded Gaussian noise on the pixel
    width only (center and height kept) and confidence 1.0.
    """
    rng = np.random.default_rng(seed)
    entries = []
    detections: List[Detection] = []
    truth = []

    for k, obj in enumerate(spec.objects):
        if obj.class_label not in class_names:
            raise UnknownClass(f"scene object {k} has class '{obj.class_label}' outside the class list")
        proj = project(spec, obj)
        if proj.clamped:
            logger.warning(f"[✂️] Object {k} ({obj.class_label} at {obj.distance_m} m) clamped to the image")

        entries.append(
            label_entry_from_bbox(
                class_names.index(obj.class_label), proj.box, spec.image_width_px, spec.image_height_px
            )
        )

        det_box = proj.box
        if spec.noise_std_px > 0:
            noisy = proj.box.width + rng.normal(0.0, spec.noise_std_px)
            det_box = _with_width(proj.box, max(float(noisy), MIN_PIXEL_WIDTH))
        detections.append(Detection(obj.class_label, det_box, 1.0))
        truth.append(TruthRow(k, obj.class_label, obj.distance_m, det_box.width, proj.clamped))

    labels = LabelFile(spec.image_id, spec.image_width_px, spec.image_height_px, tuple(entries))
    logger.debug(f"[🎬] Generated scene '{spec.image_id}' with {len(truth)} objects (seed {seed})")
    return SceneOutput(
        labels_text=format_labels(labels),
        detections_text=format_detections({spec.image_id: detections} if detections else {}),
        truth=tuple(truth),
    )
