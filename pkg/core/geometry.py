"""
Axis-aligned box arithmetic: areas, intersection, IoU, enclosing rectangle,
center distance and the DIoU loss.

Boxes are corner pairs (x_min, y_min, x_max, y_max) in pixels. Center/size
boxes are converted at the edges (see BBox.from_center_size).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

from core.errors import DegenerateGeometry, InvalidBox


@dataclass(frozen=True)
class BBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InvalidBox(f"{name} must be a number, got {value!r}")
            try:
                number = float(value)
            except OverflowError:
                number = math.inf
            if not math.isfinite(number):
                raise InvalidBox(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, number)
        if self.x_min > self.x_max:
            raise InvalidBox(f"x_min {self.x_min} > x_max {self.x_max}")
        if self.y_min > self.y_max:
            raise InvalidBox(f"y_min {self.y_min} > y_max {self.y_max}")

    @classmethod
    def from_center_size(cls, cx: float, cy: float, w: float, h: float) -> "BBox":
        return cls(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)

    def to_center_size(self) -> Tuple[float, float, float, float]:
        cx, cy = self.center
        return cx, cy, self.width, self.height

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def center(self) -> Tuple[float, float]:
        return (self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2

    @property
    def is_degenerate(self) -> bool:
        return self.width == 0 or self.height == 0

    def as_list(self) -> list:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    def translate(self, dx: float, dy: float) -> "BBox":
        return BBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def scale(self, s: float) -> "BBox":
        return BBox(self.x_min * s, self.y_min * s, self.x_max * s, self.y_max * s)


@dataclass(frozen=True)
class DiouBreakdown:
    iou: float
    center_distance_sq: float
    enclosing_diag_sq: float
    loss: float

    @property
    def penalty(self) -> float:
        return self.center_distance_sq / self.enclosing_diag_sq


def area(b: BBox) -> float:
    return (b.x_max - b.x_min) * (b.y_max - b.y_min)


def intersection_area(a: BBox, b: BBox) -> float:
    inter_w = max(0.0, min(a.x_max, b.x_max) - max(a.x_min, b.x_min))
    inter_h = max(0.0, min(a.y_max, b.y_max) - max(a.y_min, b.y_min))
    return inter_w * inter_h


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union; 0 when both boxes have zero area."""
    overlap = intersection_area(a, b)
    union = area(a) + area(b) - overlap
    if union <= 0:
        return 0.0
    return overlap / union


def iou_loss(pred: BBox, target: BBox) -> float:
    return 1.0 - iou(pred, target)


def enclosing_rect(a: BBox, b: BBox) -> BBox:
    return BBox(
        min(a.x_min, b.x_min),
        min(a.y_min, b.y_min),
        max(a.x_max, b.x_max),
        max(a.y_max, b.y_max),
    )


def center_distance_sq(a: BBox, b: BBox) -> float:
    # halves factored out so the sums stay exact for integer inputs
    dx = (a.x_min + a.x_max) - (b.x_min + b.x_max)
    dy = (a.y_min + a.y_max) - (b.y_min + b.y_max)
    return (dx * dx + dy * dy) / 4


def diou_loss(pred: BBox, target: BBox) -> DiouBreakdown:
    """
    DIoU loss = 1 - IoU + d_c^2 / diag^2, where d_c is the distance between
    box centers and diag the diagonal of the minimum enclosing rectangle.
    """
    enclosing = enclosing_rect(pred, target)
    w_union = enclosing.width
    h_union = enclosing.height
    diag_sq = w_union * w_union + h_union * h_union
    if diag_sq == 0:
        raise DegenerateGeometry(
            "both boxes collapse to the same point; the distance penalty is undefined"
        )

    overlap = iou(pred, target)
    dist_sq = center_distance_sq(pred, target)
    return DiouBreakdown(
        iou=overlap,
        center_distance_sq=dist_sq,
        enclosing_diag_sq=diag_sq,
        loss=1.0 - overlap + dist_sq / diag_sq,
    )
