"""
Squeeze-and-Excitation channel attention, forward pass only.

squeeze: global average pool per channel
excite:  s = sigmoid(W2 . relu(W1 . z + b1) + b2)
forward: out[c] = s_c * fm[c]
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from loguru import logger
from scipy.special import expit

from core.errors import DimensionMismatch, SchemaError

DEFAULT_REDUCTION_RATIO = 16


def _finite_array(name: str, values, ndim: int) -> np.ndarray:
    try:
        arr = np.array(values, dtype=np.float64)
    except OverflowError:
        raise DimensionMismatch(f"{name} contains values outside float range")
    if arr.ndim != ndim:
        raise DimensionMismatch(f"{name} must have {ndim} dimensions, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionMismatch(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FeatureMap:
    values: np.ndarray  # C x H x W

    def __post_init__(self):
        arr = _finite_array("feature map", self.values, 3)
        if min(arr.shape) < 1:
            raise DimensionMismatch(f"feature map dimensions must be >= 1, got {arr.shape}")
        object.__setattr__(self, "values", arr)

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True, eq=False)
class SeWeights:
    reduction_ratio: int
    w1: np.ndarray  # (C/r) x C
    b1: np.ndarray  # C/r
    w2: np.ndarray  # C x (C/r)
    b2: np.ndarray  # C

    def __post_init__(self):
        object.__setattr__(self, "w1", _finite_array("w1", self.w1, 2))
        object.__setattr__(self, "b1", _finite_array("b1", self.b1, 1))
        object.__setattr__(self, "w2", _finite_array("w2", self.w2, 2))
        object.__setattr__(self, "b2", _finite_array("b2", self.b2, 1))

        r = self.reduction_ratio
        if isinstance(r, bool) or not isinstance(r, int) or r < 1:
            raise DimensionMismatch(f"reduction ratio must be a positive integer, got {r!r}")
        hidden, channels = self.w1.shape
        if channels % r != 0 or hidden != channels // r:
            raise DimensionMismatch(
                f"w1 shape {self.w1.shape} does not match C={channels} with reduction ratio {r}"
            )
        if self.b1.shape != (hidden,):
            raise DimensionMismatch(f"b1 shape {self.b1.shape}, expected ({hidden},)")
        if self.w2.shape != (channels, hidden):
            raise DimensionMismatch(f"w2 shape {self.w2.shape}, expected ({channels}, {hidden})")
        if self.b2.shape != (channels,):
            raise DimensionMismatch(f"b2 shape {self.b2.shape}, expected ({channels},)")

    @property
    def channels(self) -> int:
        return self.w1.shape[1]


def squeeze(fm: FeatureMap) -> np.ndarray:
    # numpy's mean uses pairwise summation, a fixed order per shape
    return fm.values.mean(axis=(1, 2))


def excite(z: np.ndarray, w: SeWeights) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (w.channels,):
        raise DimensionMismatch(f"squeezed vector has shape {z.shape}, weights expect ({w.channels},)")
    hidden = np.maximum(w.w1 @ z + w.b1, 0.0)
    return expit(w.w2 @ hidden + w.b2)


def se_forward(fm: FeatureMap, w: SeWeights) -> FeatureMap:
    if fm.channels != w.channels:
        raise DimensionMismatch(f"feature map has {fm.channels} channels, weights expect {w.channels}")
    scales = excite(squeeze(fm), w)
    return FeatureMap(fm.values * scales[:, None, None])


def random_se_weights(channels: int, reduction_ratio: int = DEFAULT_REDUCTION_RATIO, seed: int = 0) -> SeWeights:
    """Seeded weights, uniform in +-1/sqrt(fan_in) like a freshly built linear layer."""
    if reduction_ratio < 1 or channels % reduction_ratio != 0:
        raise DimensionMismatch(f"C={channels} is not divisible by reduction ratio {reduction_ratio}")
    hidden = channels // reduction_ratio
    rng = np.random.default_rng(seed)
    bound1 = 1.0 / np.sqrt(channels)
    bound2 = 1.0 / np.sqrt(hidden)
    return SeWeights(
        reduction_ratio=reduction_ratio,
        w1=rng.uniform(-bound1, bound1, size=(hidden, channels)),
        b1=rng.uniform(-bound1, bound1, size=hidden),
        w2=rng.uniform(-bound2, bound2, size=(channels, hidden)),
        b2=rng.uniform(-bound2, bound2, size=channels),
    )


def random_feature_map(channels: int, height: int, width: int, seed: int = 0) -> FeatureMap:
    rng = np.random.default_rng(seed)
    return FeatureMap(rng.standard_normal((channels, height, width)))


def se_weights_to_dict(w: SeWeights) -> dict:
    return {
        "r": w.reduction_ratio,
        "w1": w.w1.tolist(),
        "b1": w.b1.tolist(),
        "w2": w.w2.tolist(),
        "b2": w.b2.tolist(),
    }


def se_weights_from_dict(raw: dict) -> SeWeights:
    if not isinstance(raw, dict):
        raise SchemaError("weight fixture must be a JSON object", location="$")
    missing = [k for k in ("r", "w1", "b1", "w2", "b2") if k not in raw]
    if missing:
        raise SchemaError(f"missing keys {missing}", location="$")
    try:
        return SeWeights(
            reduction_ratio=raw["r"],
            w1=raw["w1"],
            b1=raw["b1"],
            w2=raw["w2"],
            b2=raw["b2"],
        )
    except (TypeError, ValueError) as e:
        raise SchemaError(f"weights are not numeric arrays: {e}", location="$") from e


def load_se_weights(path: str | Path) -> SeWeights:
    path = Path(path)
    if not path.exists():
        raise SchemaError("weight file not found", location=str(path))
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e.msg}", location=f"{path}:{e.lineno}") from e
    weights = se_weights_from_dict(raw)
    logger.debug(f"[🧠] Loaded SE weights C={weights.channels} r={weights.reduction_ratio} from {path}")
    return weights
