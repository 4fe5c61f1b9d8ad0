import csv
import json
import sys

import pytest
from loguru import logger

from action import cli
from core.errors import InvariantViolation
from core.pipeline import build_eval_dataset, run_estimates
from core.warning import classify
from reading.config import PipelineConfig
from reading.detections import parse_detections
from reading.labels import parse_labels


@pytest.fixture(autouse=True)
def _restore_logging():
    yield
    logger.remove()
    logger.add(sys.stderr)


@pytest.fixture
def demo_out(tmp_path, demo_scene_path, capsys):
    out_dir = tmp_path / "demo"
    assert cli.main(["simulate", str(demo_scene_path), "--out-dir", str(out_dir)]) == 0
    capsys.readouterr()
    return out_dir


def _run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_simulate_writes_three_files(demo_out):
    assert (demo_out / "labels" / "demo_000.txt").exists()
    assert (demo_out / "detections.json").exists()
    assert (demo_out / "truth.csv").exists()


def test_zero_noise_distances_match_truth(demo_out, capsys):
    code, out, _ = _run(capsys, "--format", "json", "estimate", str(demo_out / "detections.json"))
    assert code == 0
    report = json.loads(out)
    with open(demo_out / "truth.csv", newline="") as f:
        truth = list(csv.DictReader(f))
    assert len(report["detections"]) == len(truth) == 20
    for entry, row in zip(report["detections"], truth):
        assert entry["class"] == row["class"]
        assert entry["distance_m"] == pytest.approx(float(row["distance_m"]), rel=1e-9)
    assert report["skipped"] == []


def test_warn_counts_add_up(demo_out, capsys):
    code, out, _ = _run(capsys, "--format", "json", "warn", str(demo_out / "detections.json"))
    assert code == 0
    report = json.loads(out)
    summary = report["summary"]
    assert summary["dangerous"] == 6
    assert summary["safe"] == 14
    assert summary["safe"] + summary["dangerous"] == summary["estimated"] == 20
    verdicts = [d["verdict"] for d in report["detections"]]
    assert verdicts.count("Dangerous") == 6
    closest = report["closest_by_image"]["demo_000"]
    assert closest["distance_m"] == pytest.approx(3.0)
    assert closest["verdict"] == "Dangerous"


def test_warn_text_is_byte_identical(demo_out, capsys):
    args = ("warn", str(demo_out / "detections.json"))
    _, first, _ = _run(capsys, *args)
    _, second, _ = _run(capsys, *args)
    assert first == second
    assert "Dangerous" in first and "Safe" in first


def test_unknown_class_index_is_skipped(tmp_path, capsys):
    path = tmp_path / "dets.json"
    path.write_text(json.dumps([
        {"image_id": "a", "class": 7, "bbox": [0, 0, 10, 10], "confidence": 0.8},
        {"image_id": "a", "class": "car", "bbox": [0, 0, 126, 50], "confidence": 0.9},
    ]))
    code, out, _ = _run(capsys, "--format", "json", "estimate", str(path))
    assert code == 0
    report = json.loads(out)
    assert [s["reason"] for s in report["skipped"]] == ["UnknownClass"]
    assert report["skipped"][0]["class"] == "7"
    assert report["detections"][0]["distance_m"] == pytest.approx(10.0)


def test_empty_detections_file(tmp_path, capsys):
    path = tmp_path / "empty.json"
    path.write_text("")
    code, out, _ = _run(capsys, "--format", "json", "estimate", str(path))
    assert code == 0
    assert json.loads(out)["summary"] == {"detections": 0, "estimated": 0, "skipped": 0}


def test_input_errors_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("[{")
    code, out, err = _run(capsys, "estimate", str(bad))
    assert code == 1
    assert out == ""
    assert "SchemaError" in err

    assert _run(capsys, "estimate", str(tmp_path / "missing.json"))[0] == 1
    assert _run(capsys, "diou", "2", "0", "1", "1", "0", "0", "1", "1")[0] == 1
    assert _run(capsys, "diou", "0", "0")[0] == 1
    assert _run(capsys, "--config", str(tmp_path / "nope.json"), "estimate", str(bad))[0] == 1


def test_invariant_violation_exits_two(monkeypatch, capsys):
    def broken(args, config):
        raise InvariantViolation("counts disagree")

    monkeypatch.setitem(cli.COMMANDS, "diou", broken)
    assert _run(capsys, "diou", "0", "0", "1", "1", "0", "0", "1", "1")[0] == 2


def test_unexpected_error_exits_two(monkeypatch, capsys):
    def broken(args, config):
        raise RuntimeError("boom")

    monkeypatch.setitem(cli.COMMANDS, "diou", broken)
    assert _run(capsys, "diou", "0", "0", "1", "1", "0", "0", "1", "1")[0] == 2


def test_diou_text(capsys):
    code, out, _ = _run(capsys, "diou", "0", "0", "1", "1", "2", "0", "3", "1")
    assert code == 0
    assert out == "iou: 0\ncenter_distance_sq: 4\nenclosing_diag_sq: 10\ndiou_loss: 1.4\niou_loss: 1\n"


def test_diou_degenerate_points(capsys):
    code, _, err = _run(capsys, "diou", "1", "1", "1", "1", "1", "1", "1", "1")
    assert code == 1
    assert "DegenerateGeometry" in err


def test_threshold_test_on_field_samples(field_samples_path, tmp_path, capsys):
    plot = tmp_path / "plot.csv"
    code, out, _ = _run(
        capsys, "--format", "json", "threshold-test", str(field_samples_path), "--plot-data", str(plot)
    )
    assert code == 0
    analysis = json.loads(out)
    assert analysis["test"]["p_value"] > 0.05
    assert analysis["significant"] is False
    assert analysis["selected_threshold_m"] == 6.0
    rows = plot.read_text().splitlines()
    assert rows[0] == "threshold_m,dangerous,safe,dangerous_share"
    assert len(rows) == 10


def test_threshold_test_identical_columns(tmp_path, capsys):
    path = tmp_path / "same.csv"
    path.write_text("threshold,dangerous,safe\n3,5,5\n4,6,6\n5,7,7\n")
    code, out, _ = _run(capsys, "--format", "json", "threshold-test", str(path))
    assert code == 0
    assert json.loads(out)["test"]["p_value"] == 1.0


def test_threshold_test_single_row(tmp_path, capsys):
    path = tmp_path / "one.csv"
    path.write_text("threshold,dangerous,safe\n6,7,11\n")
    code, _, err = _run(capsys, "threshold-test", str(path))
    assert code == 1
    assert "FewerThanTwoObservations" in err


def test_threshold_method_flag_overrides_config(field_samples_path, capsys):
    code, out, _ = _run(capsys, "--format", "json", "threshold-test", str(field_samples_path), "--method", "kruskal-wallis")
    assert code == 0
    assert json.loads(out)["test"]["method"] == "kruskal-wallis"


def test_eval_simulated_detections_score_perfectly(demo_out, capsys):
    dets = str(demo_out / "detections.json")
    code, out, _ = _run(capsys, "--format", "json", "eval", str(demo_out / "labels"), dets)
    assert code == 0
    report = json.loads(out)
    assert report["map_50"] == pytest.approx(1.0)
    assert set(report["per_class_ap"]) == {"person", "bicycle", "car", "motorcycle", "bus", "truck"}


def test_eval_compares_runs(demo_out, tmp_path, capsys):
    batch = parse_detections((demo_out / "detections.json").read_text())
    # a second run that misses every car
    other = tmp_path / "no_cars.json"
    records = json.loads((demo_out / "detections.json").read_text())
    other.write_text(json.dumps([r for r in records if r["class"] != "car"]))
    code, out, _ = _run(
        capsys, "--format", "json", "eval", str(demo_out / "labels"), str(demo_out / "detections.json"), str(other)
    )
    assert code == 0
    runs = json.loads(out)["runs"]
    assert runs["detections"]["map_50"] == pytest.approx(1.0)
    assert runs["no_cars"]["per_class_ap"]["car"] == 0.0
    assert runs["no_cars"]["map_50"] == pytest.approx(5 / 6)
    assert len(batch["demo_000"]) == 20


def test_output_flag_keeps_stdout_empty(demo_out, tmp_path, capsys):
    target = tmp_path / "report.txt"
    code, out, _ = _run(capsys, "--output", str(target), "warn", str(demo_out / "detections.json"))
    assert code == 0
    assert out == ""
    assert "Summary: detections=20" in target.read_text()


def test_log_file_gets_run_block(tmp_path, capsys):
    log = tmp_path / "logs" / "desws.log"
    code, _, _ = _run(capsys, "--log-file", str(log), "diou", "0", "0", "2", "2", "1", "1", "3", "3")
    assert code == 0
    text = log.read_text()
    assert "Command: diou" in text


def test_se_forward_with_fixture(se_fixture_path, capsys):
    code, out, _ = _run(
        capsys, "--format", "json", "se-forward", "--weights", str(se_fixture_path), "--height", "4", "--width", "4"
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["channels"] == 2
    assert len(doc["scales"]) == 2
    assert all(0.0 < s < 1.0 for s in doc["scales"])


def test_se_forward_channel_mismatch(se_fixture_path, capsys):
    code, _, err = _run(capsys, "se-forward", "--weights", str(se_fixture_path), "--channels", "3")
    assert code == 1
    assert "DimensionMismatch" in err


def test_run_estimates_in_process():
    batch = parse_detections(json.dumps([
        {"image_id": "x", "class": "person", "bbox": [0, 0, 50, 120], "confidence": 0.9},
        {"image_id": "x", "class": "car", "bbox": [10, 10, 10, 40], "confidence": 0.4},
    ]))
    report = run_estimates(PipelineConfig(), batch, with_verdicts=True)
    assert report.entries[0].distance_m == pytest.approx(7.0)
    assert report.entries[0].verdict.value == "Safe"
    assert report.skipped[0].reason == "ZeroPixelWidth"


def test_build_eval_dataset_covers_both_sides():
    labels = {"a": parse_labels("# image id=a width=100 height=100\n2 0.5 0.5 0.2 0.2\n")}
    batch = parse_detections(json.dumps([{"image_id": "b", "class": "car", "bbox": [0, 0, 5, 5], "confidence": 0.5}]))
    records = build_eval_dataset(labels, batch, PipelineConfig().class_names)
    assert [r.image_id for r in records] == ["a", "b"]
    assert len(records[0].ground_truths) == 1 and not records[0].detections
    assert len(records[1].detections) == 1 and not records[1].ground_truths


def test_text_reports_render(demo_out, field_samples_path, capsys):
    code, out, _ = _run(capsys, "threshold-test", str(field_samples_path))
    assert code == 0
    assert "no significant difference" in out
    assert "Selected threshold: 6 m (from configuration" in out

    code, out, _ = _run(capsys, "eval", str(demo_out / "labels"), str(demo_out / "detections.json"))
    assert code == 0
    assert "mAP@0.5" in out
    assert "1.0000" in out


def test_every_verdict_matches_the_true_distance(demo_out, capsys):
    code, out, _ = _run(capsys, "--format", "json", "warn", str(demo_out / "detections.json"))
    assert code == 0
    entries = json.loads(out)["detections"]
    with open(demo_out / "truth.csv", newline="") as f:
        truth = list(csv.DictReader(f))
    assert len(entries) == len(truth)
    for entry, row in zip(entries, truth):
        assert entry["verdict"] == classify(float(row["distance_m"]), 6.0).verdict.value


def test_zero_or_negative_counts_exit_one(field_samples_path, capsys):
    code, out, err = _run(
        capsys, "threshold-test", str(field_samples_path), "--method", "kruskal-wallis-permutation", "--permutations", "0"
    )
    assert code == 1
    assert out == ""
    assert "--permutations" in err
    assert _run(capsys, "se-forward", "--channels", "0")[0] == 1
    assert _run(capsys, "se-forward", "--height", "-1")[0] == 1
    assert _run(capsys, "se-forward", "--width", "0")[0] == 1


def test_huge_integers_in_inputs_exit_one(tmp_path, capsys):
    dets = tmp_path / "huge.json"
    dets.write_text('[{"image_id": "a", "class": "car", "bbox": [0, 0, 1' + "0" * 400 + ', 10], "confidence": 0.5}]')
    code, _, err = _run(capsys, "estimate", str(dets))
    assert code == 1
    assert "bbox[2]" in err

    config = tmp_path / "huge_config.json"
    config.write_text('{"focal_length_px": 1' + "0" * 400 + "}")
    code, _, err = _run(capsys, "--config", str(config), "diou", "0", "0", "1", "1", "0", "0", "1", "1")
    assert code == 1
    assert "focal_length_px" in err
