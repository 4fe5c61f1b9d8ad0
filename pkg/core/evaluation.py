"""
Detection-quality scoring at a fixed IoU threshold.

Detections are matched greedily in descending confidence order, pooled per
class across images, and integrated into an all-point interpolated average
precision. mAP@0.5 is the mean AP over classes that have ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from loguru import logger

from core.errors import EmptyDataset, InvalidBox, SchemaError, ZeroGroundTruth
from core.geometry import BBox, iou


@dataclass(frozen=True)
class Detection:
    class_label: str
    box: BBox
    confidence: float

    def __post_init__(self):
        if not isinstance(self.box, BBox):
            raise InvalidBox(f"detection box must be a BBox, got {self.box!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise SchemaError(f"confidence must lie in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class GroundTruth:
    class_label: str
    box: BBox


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    detections: Tuple[Detection, ...] = ()
    ground_truths: Tuple[GroundTruth, ...] = ()


@dataclass(frozen=True)
class MatchResult:
    """One detection after matching; `index` points into the input list."""

    index: int
    is_tp: bool
    iou: float


@dataclass
class ClassCounts:
    num_gt: int = 0
    tp: int = 0
    fp: int = 0

    @property
    def fn(self) -> int:
        return self.num_gt - self.tp


@dataclass
class EvalReport:
    per_class_ap: Dict[str, float]
    map_50: float
    counts: Dict[str, ClassCounts] = field(default_factory=dict)
    iou_threshold: float = 0.5

    def to_dict(self) -> dict:
        return {
            "iou_threshold": self.iou_threshold,
            "map_50": self.map_50,
            "per_class_ap": dict(self.per_class_ap),
            "counts": {
                label: {"num_gt": c.num_gt, "tp": c.tp, "fp": c.fp, "fn": c.fn}
                for label, c in self.counts.items()
            },
        }


def _confidence_order(dets: Sequence[Detection]) -> List[int]:
    # stable: equal confidences keep input order
    return sorted(range(len(dets)), key=lambda i: -dets[i].confidence)


def match_detections(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    iou_threshold: float = 0.5,
) -> List[MatchResult]:
    """
    Greedy matching for one image and one class.

    Detections are visited by descending confidence; each takes the unmatched
    ground truth with the highest IoU if that IoU reaches the threshold.
    Returns results in visiting order.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must lie in (0, 1], got {iou_threshold}")

    taken = [False] * len(gts)
    results = []
    for i in _confidence_order(dets):
        best_j, best_iou = -1, -1.0
        for j, gt in enumerate(gts):
            if taken[j]:
                continue
            overlap = iou(dets[i].box, gt.box)
            if overlap > best_iou:
                best_j, best_iou = j, overlap
        if best_j >= 0 and best_iou >= iou_threshold:
            taken[best_j] = True
            results.append(MatchResult(index=i, is_tp=True, iou=best_iou))
        else:
            results.append(MatchResult(index=i, is_tp=False, iou=max(best_iou, 0.0)))
    return results


def average_precision(labels: Sequence[bool], num_gt: int) -> float:
    """All-point interpolated AP over TP/FP labels sorted by confidence."""
    if num_gt <= 0:
        raise ZeroGroundTruth("average precision needs at least one ground truth")

    tp = np.cumsum(np.asarray(labels, dtype=np.float64))
    fp = np.cumsum(1.0 - np.asarray(labels, dtype=np.float64))
    rec = tp / num_gt
    prec = tp / np.maximum(tp + fp, np.finfo(np.float64).eps)

    # sentinels, then the precision envelope from right to left
    mrec = np.concatenate(([0.0], rec, [1.0]))
    mpre = np.concatenate(([0.0], prec, [0.0]))
    for i in range(mpre.size - 1, 0, -1):
        mpre[i - 1] = max(mpre[i - 1], mpre[i])

    # sum (delta recall) * prec where recall changes
    i = np.where(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[i + 1] - mrec[i]) * mpre[i + 1]))


def evaluate(
    dataset: Sequence[ImageRecord],
    iou_threshold: float = 0.5,
    class_names: Sequence[str] = (),
) -> EvalReport:
    """
    Per-class AP pooled across images and mAP over classes with ground truth.

    Pooled detections are sorted by descending confidence; ties fall back to
    the image id, then to the detection's position in its image.
    """
    if not dataset:
        raise EmptyDataset("no images to evaluate")

    extra = {
        item.class_label
        for record in dataset
        for item in (*record.ground_truths, *record.detections)
        if item.class_label not in class_names
    }
    labels_seen = list(class_names) + sorted(extra)

    pooled: Dict[str, List[Tuple[float, str, int, bool]]] = {c: [] for c in labels_seen}
    counts: Dict[str, ClassCounts] = {c: ClassCounts() for c in labels_seen}

    for record in dataset:
        for label in labels_seen:
            det_idx = [k for k, d in enumerate(record.detections) if d.class_label == label]
            gts = [g for g in record.ground_truths if g.class_label == label]
            counts[label].num_gt += len(gts)
            if not det_idx:
                continue
            dets = [record.detections[k] for k in det_idx]
            for result in match_detections(dets, gts, iou_threshold):
                pooled[label].append(
                    (dets[result.index].confidence, record.image_id, det_idx[result.index], result.is_tp)
                )

    per_class_ap: Dict[str, float] = {}
    for label in labels_seen:
        entries = sorted(pooled[label], key=lambda e: (-e[0], e[1], e[2]))
        flags = [e[3] for e in entries]
        counts[label].tp = sum(flags)
        counts[label].fp = len(flags) - counts[label].tp
        if counts[label].num_gt == 0:
            logger.debug(f"[⏭️] Class '{label}' has no ground truth; excluded from mAP")
            continue
        per_class_ap[label] = average_precision(flags, counts[label].num_gt)

    map_50 = float(np.mean(list(per_class_ap.values()))) if per_class_ap else 0.0
    return EvalReport(
        per_class_ap=per_class_ap,
        map_50=map_50,
        counts=counts,
        iou_threshold=iou_threshold,
    )
