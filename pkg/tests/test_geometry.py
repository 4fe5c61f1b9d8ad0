import itertools
from fractions import Fraction

import numpy as np
import pytest

from core.errors import DegenerateGeometry, InvalidBox
from core.geometry import (
    BBox,
    area,
    center_distance_sq,
    diou_loss,
    enclosing_rect,
    intersection_area,
    iou,
    iou_loss,
)


def _exact_iou(a, b):
    ax1, ay1, ax2, ay2 = map(Fraction, a)
    bx1, by1, bx2, by2 = map(Fraction, b)
    iw = max(Fraction(0), min(ax2, bx2) - max(ax1, bx1))
    ih = max(Fraction(0), min(ay2, by2) - max(ay1, by1))
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return Fraction(0) if union == 0 else inter / union


def _exact_diou(a, b):
    ax1, ay1, ax2, ay2 = map(Fraction, a)
    bx1, by1, bx2, by2 = map(Fraction, b)
    dx = (ax1 + ax2) / 2 - (bx1 + bx2) / 2
    dy = (ay1 + ay2) / 2 - (by1 + by2) / 2
    w = max(ax2, bx2) - min(ax1, bx1)
    h = max(ay2, by2) - min(ay1, by1)
    return 1 - _exact_iou(a, b) + (dx * dx + dy * dy) / (w * w + h * h)


def _small_boxes():
    for x1, x2 in itertools.combinations(range(4), 2):
        for y1, y2 in itertools.combinations(range(3), 2):
            yield (x1, y1, x2, y2)


def test_bbox_rejects_inverted_corners():
    with pytest.raises(InvalidBox):
        BBox(2, 0, 1, 1)
    with pytest.raises(InvalidBox):
        BBox(0, 3, 1, 1)


@pytest.mark.parametrize("bad", [float("nan"), float("inf"), "1", True])
def test_bbox_rejects_non_finite_or_non_numeric(bad):
    with pytest.raises(InvalidBox):
        BBox(0, 0, bad, 1)


def test_bbox_accessors():
    b = BBox(1, 2, 5, 8)
    assert b.width == 4
    assert b.height == 6
    assert b.center == (3, 5)
    assert b.to_center_size() == (3, 5, 4, 6)
    assert BBox.from_center_size(3, 5, 4, 6) == b
    assert b.translate(1, -2) == BBox(2, 0, 6, 6)
    assert b.scale(2) == BBox(2, 4, 10, 16)
    assert not b.is_degenerate
    assert BBox(1, 1, 1, 4).is_degenerate


def test_iou_examples():
    assert iou(BBox(0, 0, 2, 2), BBox(1, 1, 3, 3)) == pytest.approx(1 / 7)
    assert iou(BBox(0, 0, 2, 2), BBox(0, 0, 2, 2)) == 1.0
    assert iou(BBox(0, 0, 1, 1), BBox(2, 2, 3, 3)) == 0.0
    # touching edges do not overlap
    assert iou(BBox(0, 0, 1, 1), BBox(1, 0, 2, 1)) == 0.0


def test_iou_is_zero_for_two_points():
    p = BBox(1, 1, 1, 1)
    assert iou(p, p) == 0.0
    assert iou_loss(p, p) == 1.0


def test_diou_examples():
    same = diou_loss(BBox(0, 0, 2, 2), BBox(0, 0, 2, 2))
    assert same.loss == 0.0
    assert same.iou == 1.0
    assert same.center_distance_sq == 0.0

    apart = diou_loss(BBox(0, 0, 1, 1), BBox(2, 0, 3, 1))
    assert apart.iou == 0.0
    assert apart.center_distance_sq == 4.0
    assert apart.enclosing_diag_sq == 10.0
    assert apart.loss == pytest.approx(1.4)
    assert apart.penalty == pytest.approx(0.4)


def test_diou_same_point_is_degenerate():
    p = BBox(3, 3, 3, 3)
    with pytest.raises(DegenerateGeometry):
        diou_loss(p, p)


def test_diou_separated_points_are_defined():
    out = diou_loss(BBox(0, 0, 0, 0), BBox(3, 4, 3, 4))
    assert out.iou == 0.0
    assert out.center_distance_sq == 25.0
    assert out.enclosing_diag_sq == 25.0
    assert out.loss == 2.0


def test_iou_and_diou_match_exact_fractions_on_small_grid():
    boxes = list(_small_boxes())
    for a, b in itertools.product(boxes, repeat=2):
        ba, bb = BBox(*a), BBox(*b)
        assert iou(ba, bb) == pytest.approx(float(_exact_iou(a, b)), abs=1e-12)
        assert diou_loss(ba, bb).loss == pytest.approx(float(_exact_diou(a, b)), abs=1e-12)


def _random_box(rng):
    x1, x2 = np.sort(rng.uniform(-50, 50, 2))
    y1, y2 = np.sort(rng.uniform(-50, 50, 2))
    return BBox(float(x1), float(y1), float(x2), float(y2))


def test_seeded_properties():
    rng = np.random.default_rng(7)
    for _ in range(500):
        a, b = _random_box(rng), _random_box(rng)
        o = iou(a, b)
        assert 0.0 <= o <= 1.0
        assert o == pytest.approx(iou(b, a), abs=1e-12)

        d = diou_loss(a, b)
        assert 0.0 <= d.loss < 2.0
        assert d.loss == pytest.approx(diou_loss(b, a).loss, abs=1e-12)
        assert d.loss >= iou_loss(a, b) - 1e-12
        assert d.center_distance_sq <= d.enclosing_diag_sq + 1e-9

        enc = enclosing_rect(a, b)
        assert enc.x_min <= min(a.x_min, b.x_min) and enc.x_max >= max(a.x_max, b.x_max)
        assert intersection_area(a, b) <= min(area(a), area(b)) + 1e-9


def test_diou_is_translation_and_scale_invariant():
    rng = np.random.default_rng(11)
    for _ in range(200):
        a, b = _random_box(rng), _random_box(rng)
        dx, dy = rng.uniform(-100, 100, 2)
        s = float(rng.uniform(0.1, 10))
        base = diou_loss(a, b).loss
        assert diou_loss(a.translate(dx, dy), b.translate(dx, dy)).loss == pytest.approx(base, abs=1e-9)
        assert diou_loss(a.scale(s), b.scale(s)).loss == pytest.approx(base, abs=1e-9)


def test_center_distance_exact_for_integers():
    assert center_distance_sq(BBox(0, 0, 1, 1), BBox(1, 1, 2, 2)) == 2.0
    assert center_distance_sq(BBox(0, 0, 3, 3), BBox(0, 0, 3, 3)) == 0.0


def test_diou_of_a_box_with_itself_is_zero():
    rng = np.random.default_rng(13)
    for _ in range(1000):
        x1, y1 = rng.uniform(-1e3, 1e3, 2)
        w, h = rng.uniform(1e-3, 1e3, 2)
        box = BBox(float(x1), float(y1), float(x1 + w), float(y1 + h))
        assert abs(diou_loss(box, box).loss) <= 1e-12


def _grid_boxes():
    # sides of length 1 or 2 anywhere in [-4, 4]
    spans = [(lo, lo + d) for d in (1, 2) for lo in range(-4, 5 - d)]
    for x1, x2 in spans:
        for y1, y2 in spans:
            yield (x1, y1, x2, y2)


def _exact_integer_iou_diou(a, b):
    ax1, ay1, ax2, ay2 = a
    bx1, by1, bx2, by2 = b
    inter = max(0, min(ax2, bx2) - max(ax1, bx1)) * max(0, min(ay2, by2) - max(ay1, by1))
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    exact_iou = Fraction(inter, union)
    # doubled centers keep everything integral
    dx2 = (ax1 + ax2) - (bx1 + bx2)
    dy2 = (ay1 + ay2) - (by1 + by2)
    w = max(ax2, bx2) - min(ax1, bx1)
    h = max(ay2, by2) - min(ay1, by1)
    return exact_iou, 1 - exact_iou + Fraction(dx2 * dx2 + dy2 * dy2, 4 * (w * w + h * h))


def test_iou_and_diou_match_exact_fractions_on_full_grid():
    boxes = list(_grid_boxes())
    assert len(boxes) ** 2 >= 10_000
    for a, b in itertools.product(boxes, repeat=2):
        ba, bb = BBox(*a), BBox(*b)
        exact_iou, exact_diou = _exact_integer_iou_diou(a, b)
        assert iou(ba, bb) == pytest.approx(float(exact_iou), rel=1e-12)
        assert diou_loss(ba, bb).loss == pytest.approx(float(exact_diou), rel=1e-12)


def test_bbox_rejects_integer_beyond_float_range():
    with pytest.raises(InvalidBox):
        BBox(0, 0, 10**400, 1)
