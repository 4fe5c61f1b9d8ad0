"""
Adaptive width-based monocular distance estimation.

Similar triangles give D_img / D_obj = w_img / w_obj with D_img the focal
length in pixels, so D_obj = f * w_obj / w_img. Each class has a preset
real-world width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterator, Mapping

from core.errors import NonPositiveInput, UnknownClass, ZeroPixelWidth
from core.evaluation import Detection

# meters; typical physical widths, overridable from the config file
DEFAULT_CLASS_WIDTHS_M = {
    "person": 0.5,
    "bicycle": 0.6,
    "car": 1.8,
    "motorcycle": 0.8,
    "bus": 2.5,
    "truck": 2.5,
}


def _require_positive(name: str, value: float) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise NonPositiveInput(f"{name} must be a number, got {value!r}")
    try:
        number = float(value)
    except OverflowError:
        number = math.inf
    if not math.isfinite(number) or number <= 0:
        raise NonPositiveInput(f"{name} must be positive and finite, got {value!r}")
    return number


@dataclass(frozen=True)
class CameraModel:
    focal_length_px: float

    def __post_init__(self):
        object.__setattr__(
            self, "focal_length_px", _require_positive("focal_length_px", self.focal_length_px)
        )


class ClassWidthTable(Mapping):
    """Read-only class label -> real width (m)."""

    def __init__(self, widths_m: Mapping[str, float]):
        checked = {label: _require_positive(f"width of '{label}'", w) for label, w in widths_m.items()}
        self._widths = MappingProxyType(checked)

    @classmethod
    def from_mapping(cls, widths_m: Mapping[str, float]) -> "ClassWidthTable":
        return cls(widths_m)

    @classmethod
    def default(cls) -> "ClassWidthTable":
        return cls.from_mapping(DEFAULT_CLASS_WIDTHS_M)

    def __getitem__(self, label: str) -> float:
        return self._widths[label]

    def __iter__(self) -> Iterator[str]:
        return iter(self._widths)

    def __len__(self) -> int:
        return len(self._widths)

    def __repr__(self) -> str:
        return f"ClassWidthTable({dict(self._widths)!r})"


@dataclass(frozen=True)
class DistanceEstimate:
    class_label: str
    pixel_width: float
    real_width_m: float
    distance_m: float


def distance_from_pixel_width(cam: CameraModel, real_width_m: float, pixel_width: float) -> float:
    if pixel_width <= 0:
        raise ZeroPixelWidth(f"pixel width must be positive, got {pixel_width}")
    return cam.focal_length_px * real_width_m / pixel_width


def estimate_distance(cam: CameraModel, widths: Mapping[str, float], det: Detection) -> DistanceEstimate:
    """Distance to a detection from its box width (x extent, never height)."""
    if det.class_label not in widths:
        raise UnknownClass(f"no preset width for class '{det.class_label}'")
    real_width = widths[det.class_label]
    pixel_width = det.box.width
    return DistanceEstimate(
        class_label=det.class_label,
        pixel_width=pixel_width,
        real_width_m=real_width,
        distance_m=distance_from_pixel_width(cam, real_width, pixel_width),
    )


def calibrate_focal(known_distance_m: float, real_width_m: float, pixel_width: float) -> CameraModel:
    """Focal length from one reference object at a known distance."""
    d = _require_positive("known_distance_m", known_distance_m)
    w = _require_positive("real_width_m", real_width_m)
    p = _require_positive("pixel_width", pixel_width)
    return CameraModel(focal_length_px=d * p / w)
