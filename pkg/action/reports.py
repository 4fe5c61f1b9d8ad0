"""
Report rendering: JSON documents and aligned plain-text tables.

Text goes through a fixed-width, colour-free rich console so the same
inputs always render to the same bytes.
"""

from __future__ import annotations

import io
import json
from typing import Dict, List, Sequence

from rich import box
from rich.console import Console
from rich.table import Table

from core.evaluation import EvalReport
from core.geometry import DiouBreakdown
from core.pipeline import RunReport
from core.warning import ThresholdAnalysis

CONSOLE_WIDTH = 120


def _render(*renderables) -> str:
    buf = io.StringIO()
    console = Console(
        file=buf,
        width=CONSOLE_WIDTH,
        color_system=None,
        force_terminal=False,
        highlight=False,
        emoji=False,
        markup=False,
        soft_wrap=False,
    )
    for r in renderables:
        console.print(r)
    return buf.getvalue()


def _table(title: str, columns: Sequence[str], rows: List[Sequence[str]]) -> Table:
    table = Table(title=title, box=box.ASCII, title_justify="left")
    for k, col in enumerate(columns):
        table.add_column(col, justify="left" if k == 0 else "right", no_wrap=True)
    for row in rows:
        table.add_row(*row)
    return table


def to_json(document: dict) -> str:
    return json.dumps(document, indent=2) + "\n"


def run_report_text(report: RunReport) -> str:
    columns = ["image", "#", "class", "x_min", "y_min", "x_max", "y_max", "width px", "distance m"]
    if report.with_verdicts:
        columns.append("verdict")
    rows = []
    for e in report.entries:
        row = [e.image_id, str(e.index), e.class_label, *(f"{v:.2f}" for v in e.box.as_list()),
               f"{e.pixel_width:.3f}", f"{e.distance_m:.3f}"]
        if report.with_verdicts:
            row.append(e.verdict.value)
        rows.append(row)

    parts = [_table("Detections", columns, rows)]
    if report.skipped:
        parts.append(
            _table(
                "Skipped",
                ["image", "#", "class", "reason", "detail"],
                [[s.image_id, str(s.index), s.class_label, s.reason, s.detail] for s in report.skipped],
            )
        )
    closest = report.closest_by_image
    if closest:
        parts.append(
            _table(
                "Closest object per image",
                ["image", "class", "distance m"] + (["verdict"] if report.with_verdicts else []),
                [
                    [k, v.class_label, f"{v.distance_m:.3f}"] + ([v.verdict.value] if report.with_verdicts else [])
                    for k, v in closest.items()
                ],
            )
        )
    summary = ", ".join(f"{k}={v}" for k, v in report.summary.items())
    parts.append(f"Summary: {summary}")
    if report.with_verdicts:
        parts.append(f"Danger threshold: {report.config.get('danger_threshold_m')} m (Safe only when strictly greater)")
    return _render(*parts)


def eval_text(reports: Dict[str, EvalReport]) -> str:
    """Per-class AP with one column per run, then mAP."""
    runs = list(reports)
    first = reports[runs[0]]
    labels = list(first.counts)
    for r in runs[1:]:
        labels += [c for c in reports[r].counts if c not in labels]

    rows = []
    for label in labels:
        num_gt = next((reports[r].counts[label].num_gt for r in runs if label in reports[r].counts), 0)
        row = [label, str(num_gt)]
        for r in runs:
            ap = reports[r].per_class_ap.get(label)
            row.append("-" if ap is None else f"{ap:.4f}")
        rows.append(row)
    rows.append([f"mAP@{first.iou_threshold:g}", ""] + [f"{reports[r].map_50:.4f}" for r in runs])

    parts = [_table("Average precision", ["class", "GT"] + runs, rows)]
    for r in runs:
        counts = reports[r].counts
        parts.append(
            _table(
                f"Counts ({r})",
                ["class", "TP", "FP", "FN"],
                [[c, str(n.tp), str(n.fp), str(n.fn)] for c, n in counts.items()],
            )
        )
    return _render(*parts)


def eval_json(reports: Dict[str, EvalReport]) -> dict:
    if len(reports) == 1:
        return next(iter(reports.values())).to_dict()
    return {"runs": {name: r.to_dict() for name, r in reports.items()}}


def threshold_text(analysis: ThresholdAnalysis) -> str:
    result = analysis.result
    series = _table(
        "Threshold samples",
        ["threshold m", "dangerous", "safe", "dangerous share"],
        [
            [f"{row['threshold_m']:g}", str(row["dangerous"]), str(row["safe"]), f"{row['dangerous_share']:.3f}"]
            for row in analysis.series
        ],
    )
    verdict = "no significant difference" if analysis.consistent else "significant difference"
    lines = [
        f"Test: {result.method.value}",
        f"Statistic: {result.statistic:.6g}",
        f"p-value: {result.p_value:.6g}",
        f"alpha: {analysis.alpha:g} -> {verdict} (p {'>' if analysis.consistent else '<='} alpha)",
        f"Selected threshold: {analysis.selected_threshold_m:g} m (from configuration, not derived by the test)",
    ]
    return _render(series, *lines)


def threshold_plot_csv(analysis: ThresholdAnalysis) -> str:
    lines = ["threshold_m,dangerous,safe,dangerous_share"]
    lines += [
        f"{row['threshold_m']!r},{row['dangerous']},{row['safe']},{row['dangerous_share']!r}"
        for row in analysis.series
    ]
    return "\n".join(lines) + "\n"


def diou_text(breakdown: DiouBreakdown, iou_loss: float) -> str:
    return "".join(
        f"{name}: {value:.12g}\n"
        for name, value in (
            ("iou", breakdown.iou),
            ("center_distance_sq", breakdown.center_distance_sq),
            ("enclosing_diag_sq", breakdown.enclosing_diag_sq),
            ("diou_loss", breakdown.loss),
            ("iou_loss", iou_loss),
        )
    )


def diou_json(breakdown: DiouBreakdown, iou_loss: float) -> dict:
    return {
        "iou": breakdown.iou,
        "center_distance_sq": breakdown.center_distance_sq,
        "enclosing_diag_sq": breakdown.enclosing_diag_sq,
        "loss": breakdown.loss,
        "iou_loss": iou_loss,
    }
