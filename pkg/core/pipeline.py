"""
The DESWS flow: detections -> distance estimation -> threshold warning,
plus the glue that lines up ground truth and detections for evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

from loguru import logger

from core.distance import estimate_distance
from core.errors import InvariantViolation, UnknownClass, ZeroPixelWidth
from core.evaluation import ImageRecord
from core.geometry import BBox
from core.warning import Verdict, classify
from reading.config import PipelineConfig
from reading.detections import DetectionBatch
from reading.labels import LabelFile


@dataclass(frozen=True)
class ReportEntry:
    image_id: str
    index: int
    class_label: str
    box: BBox
    pixel_width: float
    distance_m: float
    verdict: Optional[Verdict] = None

    def to_dict(self) -> dict:
        out = {
            "image_id": self.image_id,
            "index": self.index,
            "class": self.class_label,
            "bbox": self.box.as_list(),
            "pixel_width": self.pixel_width,
            "distance_m": self.distance_m,
        }
        if self.verdict is not None:
            out["verdict"] = self.verdict.value
        return out


@dataclass(frozen=True)
class SkippedEntry:
    image_id: str
    index: int
    class_label: str
    reason: str
    detail: str

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "index": self.index,
            "class": self.class_label,
            "reason": self.reason,
            "detail": self.detail,
        }


@dataclass
class RunReport:
    entries: List[ReportEntry] = field(default_factory=list)
    skipped: List[SkippedEntry] = field(default_factory=list)
    config: Dict = field(default_factory=dict)
    with_verdicts: bool = False

    @property
    def summary(self) -> Dict[str, int]:
        counts = {"detections": len(self.entries) + len(self.skipped), "estimated": len(self.entries), "skipped": len(self.skipped)}
        if self.with_verdicts:
            counts["safe"] = sum(e.verdict is Verdict.SAFE for e in self.entries)
            counts["dangerous"] = sum(e.verdict is Verdict.DANGEROUS for e in self.entries)
        return counts

    @property
    def closest_by_image(self) -> Dict[str, ReportEntry]:
        """The nearest estimated object per image (the front target)."""
        closest: Dict[str, ReportEntry] = {}
        for e in self.entries:
            if e.image_id not in closest or e.distance_m < closest[e.image_id].distance_m:
                closest[e.image_id] = e
        return closest

    def to_dict(self) -> dict:
        return {
            "summary": self.summary,
            "detections": [e.to_dict() for e in self.entries],
            "skipped": [s.to_dict() for s in self.skipped],
            "closest_by_image": {k: v.to_dict() for k, v in self.closest_by_image.items()},
            "config": self.config,
        }


def run_estimates(config: PipelineConfig, batch: DetectionBatch, with_verdicts: bool = False) -> RunReport:
    """
    Estimate a distance for every detection (and a verdict when asked).
    Detections that cannot be estimated land in the skipped list with the reason.
    """
    cam = config.camera
    widths = config.width_table
    report = RunReport(config=config.to_dict(), with_verdicts=with_verdicts)

    for image_id, dets in batch.items():
        for index, det in enumerate(dets):
            try:
                est = estimate_distance(cam, widths, det)
            except (UnknownClass, ZeroPixelWidth) as e:
                logger.debug(f"[⏭️] {image_id}#{index} skipped: {e}")
                report.skipped.append(SkippedEntry(image_id, index, det.class_label, type(e).__name__, e.message))
                continue

            projected = est.distance_m * est.pixel_width
            expected = cam.focal_length_px * est.real_width_m
            if abs(projected - expected) > 1e-9 * expected:
                raise InvariantViolation(
                    f"distance {est.distance_m} x width {est.pixel_width} != f x w_obj {expected}",
                    location=f"{image_id}#{index}",
                )

            verdict = None
            if with_verdicts:
                verdict = classify(est.distance_m, config.danger_threshold_m).verdict
            report.entries.append(
                ReportEntry(image_id, index, det.class_label, det.box, est.pixel_width, est.distance_m, verdict)
            )

    summary = report.summary
    if with_verdicts and summary["safe"] + summary["dangerous"] != summary["estimated"]:
        raise InvariantViolation(f"verdict counts do not add up: {summary}")
    logger.debug(f"[📏] Estimated {summary['estimated']} distances, skipped {summary['skipped']}")
    return report


def build_eval_dataset(
    labels: Mapping[str, LabelFile],
    batch: DetectionBatch,
    class_names: Sequence[str],
) -> List[ImageRecord]:
    """One record per image id seen in either input, sorted by id."""
    records = []
    for image_id in sorted(set(labels) | set(batch)):
        gts = labels[image_id].to_ground_truths(class_names) if image_id in labels else []
        records.append(
            ImageRecord(image_id=image_id, detections=tuple(batch.get(image_id, ())), ground_truths=tuple(gts))
        )
    return records
