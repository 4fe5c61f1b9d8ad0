"""
Command-line front end.

    run_desws.py [--config PATH] [--output PATH] [--format text|json] [--log-file PATH] [-v] <command> ...

Reports go to stdout (or --output); diagnostics go to stderr through loguru.
Exit codes: 0 success, 1 input error, 2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from loguru import logger

from action import reports
from core.errors import DeswsError, InputError
from core.evaluation import evaluate
from core.geometry import BBox, diou_loss, iou_loss
from core.pipeline import build_eval_dataset, run_estimates
from core.simulator import generate
from core.utils.logger import configure_logging, save_run_to_log
from core.warning import TestMethod, analyze_thresholds
from models.se_block import excite, load_se_weights, random_feature_map, random_se_weights, se_forward, squeeze
from reading.config import PipelineConfig, load_config
from reading.detections import load_detections
from reading.labels import load_label_dir
from reading.scene import load_scene
from reading.threshold_samples import load_threshold_samples

DEFAULT_SE_CHANNELS = 32


def _at_least_one(value: Optional[int], flag: str) -> None:
    if value is not None and value < 1:
        raise InputError(f"must be at least 1, got {value}", location=flag)


def _emit(args: argparse.Namespace, text: str) -> None:
    if args.output:
        out = Path(args.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
        logger.debug(f"[💾] Report written to {out}")
    else:
        sys.stdout.write(text)


def _run_report(args: argparse.Namespace, config: PipelineConfig, with_verdicts: bool) -> dict:
    batch = load_detections(args.detections, config.class_names)
    report = run_estimates(config, batch, with_verdicts=with_verdicts)
    if args.format == "json":
        _emit(args, reports.to_json(report.to_dict()))
    else:
        _emit(args, reports.run_report_text(report))
    return report.summary


def cmd_estimate(args: argparse.Namespace, config: PipelineConfig) -> dict:
    return _run_report(args, config, with_verdicts=False)


def cmd_warn(args: argparse.Namespace, config: PipelineConfig) -> dict:
    return _run_report(args, config, with_verdicts=True)


def _run_names(paths: List[str]) -> List[str]:
    stems = [Path(p).stem for p in paths]
    # fall back to full paths when two runs share a file name
    return stems if len(set(stems)) == len(stems) else list(paths)


def cmd_eval(args: argparse.Namespace, config: PipelineConfig) -> dict:
    labels = load_label_dir(args.gt_dir, config.class_names)
    iou_threshold = args.iou_threshold if args.iou_threshold is not None else config.iou_threshold
    if not 0.0 < iou_threshold <= 1.0:
        raise InputError(f"IoU threshold must lie in (0, 1], got {iou_threshold}")

    results = {}
    for name, path in zip(_run_names(args.detections), args.detections):
        batch = load_detections(path, config.class_names)
        dataset = build_eval_dataset(labels, batch, config.class_names)
        results[name] = evaluate(dataset, iou_threshold, config.class_names)
        logger.info(f"[🎯] {name}: mAP@{iou_threshold:g} = {results[name].map_50:.4f}")

    if args.format == "json":
        _emit(args, reports.to_json(reports.eval_json(results)))
    else:
        _emit(args, reports.eval_text(results))
    return {name: r.map_50 for name, r in results.items()}


def cmd_threshold_test(args: argparse.Namespace, config: PipelineConfig) -> dict:
    _at_least_one(args.permutations, "--permutations")
    samples = load_threshold_samples(args.samples)
    analysis = analyze_thresholds(
        samples,
        alpha=args.alpha if args.alpha is not None else config.alpha,
        method=TestMethod(args.method) if args.method else config.test_method,
        selected_threshold_m=config.danger_threshold_m,
        exact_max_total=config.exact_max_total,
        permutations=args.permutations,
        seed=args.seed,
    )
    if args.plot_data:
        plot_path = Path(args.plot_data)
        plot_path.parent.mkdir(parents=True, exist_ok=True)
        plot_path.write_text(reports.threshold_plot_csv(analysis), encoding="utf-8")
        logger.info(f"[📈] Plot data written to {plot_path}")

    if args.format == "json":
        _emit(args, reports.to_json(analysis.to_dict()))
    else:
        _emit(args, reports.threshold_text(analysis))
    return {"p_value": analysis.result.p_value, "consistent": analysis.consistent}


def cmd_simulate(args: argparse.Namespace, config: PipelineConfig) -> dict:
    spec = load_scene(args.scene, config)
    output = generate(spec, seed=args.seed, class_names=config.class_names)

    out_dir = Path(args.out_dir)
    (out_dir / "labels").mkdir(parents=True, exist_ok=True)
    files = {
        out_dir / "labels" / f"{spec.image_id}.txt": output.labels_text,
        out_dir / "detections.json": output.detections_text,
        out_dir / "truth.csv": output.truth_text,
    }
    for path, text in files.items():
        path.write_text(text, encoding="utf-8")
    logger.info(f"[🎬] Wrote {len(files)} files for scene '{spec.image_id}' to {out_dir}")

    summary = {
        "image_id": spec.image_id,
        "objects": len(output.truth),
        "clamped": sum(row.clamped for row in output.truth),
        "seed": args.seed,
        "files": [str(p) for p in files],
    }
    if args.format == "json":
        _emit(args, reports.to_json(summary))
    else:
        lines = [f"{k}: {v}" for k, v in summary.items() if k != "files"] + summary["files"]
        _emit(args, "\n".join(lines) + "\n")
    return summary


def cmd_diou(args: argparse.Namespace, config: PipelineConfig) -> dict:
    pred = BBox(*args.coords[:4])
    target = BBox(*args.coords[4:])
    breakdown = diou_loss(pred, target)
    plain = iou_loss(pred, target)
    if args.format == "json":
        _emit(args, reports.to_json(reports.diou_json(breakdown, plain)))
    else:
        _emit(args, reports.diou_text(breakdown, plain))
    return {"loss": breakdown.loss}


def cmd_se_forward(args: argparse.Namespace, config: PipelineConfig) -> dict:
    for flag in ("channels", "height", "width"):
        _at_least_one(getattr(args, flag), f"--{flag}")
    if args.weights:
        weights = load_se_weights(args.weights)
    else:
        c = DEFAULT_SE_CHANNELS if args.channels is None else args.channels
        weights = random_se_weights(c, config.se_reduction_ratio, seed=args.seed)
    channels = weights.channels if args.channels is None else args.channels
    fm = random_feature_map(channels, args.height, args.width, seed=args.seed)
    scales = excite(squeeze(fm), weights)
    out = se_forward(fm, weights)

    document = {
        "channels": out.channels,
        "height": out.height,
        "width": out.width,
        "reduction_ratio": weights.reduction_ratio,
        "seed": args.seed,
        "scales": [float(s) for s in scales],
    }
    if args.format == "json":
        _emit(args, reports.to_json(document))
    else:
        _emit(args, "".join(f"channel {c}: {s:.12g}\n" for c, s in enumerate(document["scales"])))
    return {"channels": out.channels}


COMMANDS: Dict[str, Callable[[argparse.Namespace, PipelineConfig], dict]] = {
    "estimate": cmd_estimate,
    "warn": cmd_warn,
    "eval": cmd_eval,
    "threshold-test": cmd_threshold_test,
    "simulate": cmd_simulate,
    "diou": cmd_diou,
    "se-forward": cmd_se_forward,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="run_desws.py",
        description="Detection, distance estimation and safety warning toolkit",
    )
    parser.add_argument("--config", help="pipeline config JSON (defaults built in)")
    parser.add_argument("--output", help="write the report here instead of stdout")
    parser.add_argument("--format", choices=("text", "json"), default="text")
    parser.add_argument("--log-file", help="append DEBUG logs and a run summary to this file")
    parser.add_argument("-v", "--verbose", action="store_true", help="DEBUG logs on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="distance per detection")
    p.add_argument("detections")

    p = sub.add_parser("warn", help="distance and Safe/Dangerous verdict per detection")
    p.add_argument("detections")

    p = sub.add_parser("eval", help="per-class AP and mAP against a label directory")
    p.add_argument("gt_dir")
    p.add_argument("detections", nargs="+", help="one or more detection files, compared side by side")
    p.add_argument("--iou-threshold", type=float)

    p = sub.add_parser("threshold-test", help="rank test of dangerous vs safe counts")
    p.add_argument("samples")
    p.add_argument("--alpha", type=float)
    p.add_argument("--method", choices=[m.value for m in TestMethod])
    p.add_argument("--permutations", type=int, help="draws for kruskal-wallis-permutation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--plot-data", help="write threshold vs counts CSV here")

    p = sub.add_parser("simulate", help="generate labels, detections and truth from a scene file")
    p.add_argument("scene")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("diou", help="IoU, DIoU and IoU losses of two boxes")
    p.add_argument(
        "coords", type=float, nargs=8, metavar="V",
        help="pred x_min y_min x_max y_max, then target x_min y_min x_max y_max",
    )

    p = sub.add_parser("se-forward", help="SE block scales on a seeded random feature map")
    p.add_argument("--weights", help="SE weight JSON; seeded random weights otherwise")
    p.add_argument("--channels", type=int)
    p.add_argument("--height", type=int, default=8)
    p.add_argument("--width", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on bad usage; that is an input error here
        return 0 if e.code in (0, None) else 1

    configure_logging(args.verbose, args.log_file)
    try:
        config = load_config(args.config)
        summary = COMMANDS[args.command](args, config)
    except DeswsError as e:
        logger.error(f"[❌] {e}")
        return e.exit_code
    except Exception as e:
        logger.opt(exception=e).error(f"[💥] Internal error: {e}")
        return 2

    if args.log_file:
        save_run_to_log(args.command, summary, args.log_file)
    return 0
