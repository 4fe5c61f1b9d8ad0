"""
Scene spec files for the simulator (JSON):

    {
      "image_id": "scene_000",
      "focal_length_px": 700,            // optional, config value otherwise
      "image_width_px": 1920,
      "image_height_px": 1080,
      "noise_std_px": 0.0,               // optional
      "objects": [
        {"class": "car", "distance_m": 10, "lateral_offset_m": 0.0,
         "real_width_m": 1.8, "real_height_m": 1.5}   // sizes optional
      ]
    }
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from loguru import logger

from core.errors import InputError, SchemaError, UnknownClass
from core.simulator import SceneObject, SceneSpec
from reading.config import PipelineConfig

_SCENE_KEYS = {"image_id", "focal_length_px", "image_width_px", "image_height_px", "noise_std_px", "objects"}
_OBJECT_KEYS = {"class", "distance_m", "lateral_offset_m", "real_width_m", "real_height_m"}


def _num(raw: dict, key: str, path: str, default=None) -> float:
    value = raw.get(key, default)
    if value is None:
        raise SchemaError(f"missing field '{key}'", location=path)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"expected a number, got {value!r}", location=f"{path}.{key}")
    try:
        number = float(value)
    except OverflowError:
        number = math.inf
    if not math.isfinite(number):
        raise SchemaError(f"expected a finite number, got {value!r}", location=f"{path}.{key}")
    return number


def _image_side(raw: dict, key: str) -> int:
    value = raw.get(key)
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise SchemaError(f"expected a positive integer, got {value!r}", location=f"$.{key}")
    return value


def _parse_object(raw, k: int, config: PipelineConfig) -> SceneObject:
    path = f"$.objects[{k}]"
    if not isinstance(raw, dict):
        raise SchemaError("expected an object", location=path)
    for key in raw:
        if key not in _OBJECT_KEYS:
            raise SchemaError("unknown field", location=f"{path}.{key}")
    label = raw.get("class")
    if not isinstance(label, str):
        raise SchemaError(f"expected a class name, got {label!r}", location=f"{path}.class")
    if "real_width_m" not in raw and label not in config.widths_m:
        raise UnknownClass(f"no preset width for class '{label}'", location=f"{path}.class")
    if "real_height_m" not in raw and label not in config.heights_m:
        raise UnknownClass(f"no preset height for class '{label}'", location=f"{path}.class")
    try:
        return SceneObject(
            class_label=label,
            real_width_m=_num(raw, "real_width_m", path, config.widths_m.get(label)),
            real_height_m=_num(raw, "real_height_m", path, config.heights_m.get(label)),
            distance_m=_num(raw, "distance_m", path),
            lateral_offset_m=_num(raw, "lateral_offset_m", path, 0.0),
        )
    except InputError as e:
        if e.location is None:
            e.location = path
        raise


def parse_scene(text: str, config: PipelineConfig) -> SceneSpec:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e.msg}", location=f"line {e.lineno}") from e
    if not isinstance(raw, dict):
        raise SchemaError("scene must be a JSON object", location="$")
    for key in raw:
        if key not in _SCENE_KEYS:
            raise SchemaError("unknown field", location=f"$.{key}")
    objects = raw.get("objects", [])
    if not isinstance(objects, list):
        raise SchemaError("expected a list", location="$.objects")

    return SceneSpec(
        focal_length_px=_num(raw, "focal_length_px", "$", config.focal_length_px),
        image_width_px=_image_side(raw, "image_width_px"),
        image_height_px=_image_side(raw, "image_height_px"),
        objects=tuple(_parse_object(o, k, config) for k, o in enumerate(objects)),
        noise_std_px=_num(raw, "noise_std_px", "$", 0.0),
        image_id=str(raw.get("image_id", "scene")),
    )


def load_scene(path: str | Path, config: PipelineConfig) -> SceneSpec:
    path = Path(path)
    if not path.exists():
        raise InputError("scene file not found", location=str(path))
    spec = parse_scene(path.read_text(encoding="utf-8"), config)
    logger.debug(f"[🎬] Loaded scene '{spec.image_id}' with {len(spec.objects)} objects from {path}")
    return spec
