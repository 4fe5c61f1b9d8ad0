"""
Pipeline configuration: one JSON document with units in the key names.

Missing keys fall back to the module defaults below; unknown keys are
rejected so a typo in a unit-bearing name cannot pass silently.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

from loguru import logger

from core.distance import DEFAULT_CLASS_WIDTHS_M, CameraModel, ClassWidthTable
from core.errors import ConfigError
from core.warning import DEFAULT_ALPHA, DEFAULT_DANGER_THRESHOLD_M, EXACT_MAX_TOTAL, TestMethod
from models.se_block import DEFAULT_REDUCTION_RATIO

# indices 0-5 in label files
DEFAULT_CLASS_NAMES = ("person", "bicycle", "car", "motorcycle", "bus", "truck")

# meters; only used to draw plausible simulated boxes
DEFAULT_CLASS_HEIGHTS_M = {
    "person": 1.7,
    "bicycle": 1.1,
    "car": 1.5,
    "motorcycle": 1.2,
    "bus": 3.2,
    "truck": 3.5,
}

DEFAULT_FOCAL_LENGTH_PX = 700.0
DEFAULT_IOU_THRESHOLD = 0.5

CONFIG_PATH = Path(__file__).resolve().parent.parent / "codex" / "desws_config.json"


@dataclass(frozen=True)
class PipelineConfig:
    class_names: Tuple[str, ...] = DEFAULT_CLASS_NAMES
    widths_m: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_CLASS_WIDTHS_M))
    heights_m: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_CLASS_HEIGHTS_M))
    focal_length_px: float = DEFAULT_FOCAL_LENGTH_PX
    danger_threshold_m: float = DEFAULT_DANGER_THRESHOLD_M
    test_method: TestMethod = TestMethod.MANN_WHITNEY_EXACT
    alpha: float = DEFAULT_ALPHA
    iou_threshold: float = DEFAULT_IOU_THRESHOLD
    se_reduction_ratio: int = DEFAULT_REDUCTION_RATIO
    exact_max_total: int = EXACT_MAX_TOTAL

    @property
    def camera(self) -> CameraModel:
        return CameraModel(self.focal_length_px)

    @property
    def width_table(self) -> ClassWidthTable:
        return ClassWidthTable(self.widths_m)

    def to_dict(self) -> dict:
        return {
            "class_names": list(self.class_names),
            "widths_m": dict(self.widths_m),
            "heights_m": dict(self.heights_m),
            "focal_length_px": self.focal_length_px,
            "danger_threshold_m": self.danger_threshold_m,
            "test_method": self.test_method.value,
            "alpha": self.alpha,
            "iou_threshold": self.iou_threshold,
            "se_reduction_ratio": self.se_reduction_ratio,
            "exact_max_total": self.exact_max_total,
        }


def _finite_or_inf(value) -> float:
    try:
        return float(value)
    except OverflowError:
        return math.inf


def _positive(raw: dict, key: str, default: float) -> float:
    value = raw.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"must be a number, got {value!r}", location=f"$.{key}")
    number = _finite_or_inf(value)
    if not math.isfinite(number) or number <= 0:
        raise ConfigError(f"must be a positive finite number, got {value!r}", location=f"$.{key}")
    return number


def _positive_int(raw: dict, key: str, default: int) -> int:
    value = raw.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"must be a positive integer, got {value!r}", location=f"$.{key}")
    return value


def _width_map(raw: dict, key: str, default: Dict[str, float]) -> Dict[str, float]:
    value = raw.get(key, default)
    if not isinstance(value, dict):
        raise ConfigError("must be an object of class -> meters", location=f"$.{key}")
    checked = {}
    for label, meters in value.items():
        number = math.nan if isinstance(meters, bool) or not isinstance(meters, (int, float)) else _finite_or_inf(meters)
        if not number > 0 or not math.isfinite(number):
            raise ConfigError(f"must be a positive finite number, got {meters!r}", location=f"$.{key}.{label}")
        checked[label] = number
    return checked


def config_from_dict(raw: dict) -> PipelineConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object", location="$")
    known = set(PipelineConfig.__dataclass_fields__)
    for key in raw:
        if key not in known:
            raise ConfigError("unknown key", location=f"$.{key}")

    names = raw.get("class_names", list(DEFAULT_CLASS_NAMES))
    if not isinstance(names, list) or not all(isinstance(n, str) and n for n in names):
        raise ConfigError("must be a list of non-empty strings", location="$.class_names")
    if len(set(names)) != len(names):
        raise ConfigError("class names must be distinct", location="$.class_names")

    method_raw = raw.get("test_method", TestMethod.MANN_WHITNEY_EXACT.value)
    try:
        method = TestMethod(method_raw)
    except ValueError:
        choices = ", ".join(m.value for m in TestMethod)
        raise ConfigError(f"unknown test method {method_raw!r} (one of {choices})", location="$.test_method")

    alpha = _positive(raw, "alpha", DEFAULT_ALPHA)
    if alpha >= 1:
        raise ConfigError(f"must lie in (0, 1), got {alpha}", location="$.alpha")
    iou_threshold = _positive(raw, "iou_threshold", DEFAULT_IOU_THRESHOLD)
    if iou_threshold > 1:
        raise ConfigError(f"must lie in (0, 1], got {iou_threshold}", location="$.iou_threshold")

    return PipelineConfig(
        class_names=tuple(names),
        widths_m=_width_map(raw, "widths_m", DEFAULT_CLASS_WIDTHS_M),
        heights_m=_width_map(raw, "heights_m", DEFAULT_CLASS_HEIGHTS_M),
        focal_length_px=_positive(raw, "focal_length_px", DEFAULT_FOCAL_LENGTH_PX),
        danger_threshold_m=_positive(raw, "danger_threshold_m", DEFAULT_DANGER_THRESHOLD_M),
        test_method=method,
        alpha=alpha,
        iou_threshold=iou_threshold,
        se_reduction_ratio=_positive_int(raw, "se_reduction_ratio", DEFAULT_REDUCTION_RATIO),
        exact_max_total=_positive_int(raw, "exact_max_total", EXACT_MAX_TOTAL),
    )


def parse_config(text: str, source: str = "<config>") -> PipelineConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg}", location=f"{source}:{e.lineno}") from e
    return config_from_dict(raw)


def load_config(path: Optional[str | Path] = None) -> PipelineConfig:
    """Load a config file; with no path, the shipped defaults are used."""
    if path is None:
        logger.debug("[⚙️] No config given, using built-in defaults")
        return PipelineConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError("config file not found", location=str(path))
    config = parse_config(path.read_text(encoding="utf-8"), source=str(path))
    logger.debug(f"[⚙️] Loaded config from {path}: f={config.focal_length_px}px, threshold={config.danger_threshold_m}m")
    return config
