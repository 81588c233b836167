import numpy as np
import pytest
import shapely
from hypothesis import given, settings
from hypothesis import strategies as st

from trusteval.geometry import (
    Shape,
    ShapeError,
    ShapeSet,
    augmented_distance,
    distance,
    distance_threshold,
    giou_distance,
    iou_distance,
    pairwise_distance,
    volume,
)

coord = st.floats(-50, 50, allow_nan=False)
side = st.floats(0.5, 40, allow_nan=False)


@st.composite
def boxes(draw):
    x, y = draw(coord), draw(coord)
    return Shape(box=(x, y, x + draw(side), y + draw(side)))


def raster(box, scale=4):
    """Occupancy grid of an integer box at ``scale`` cells per unit."""
    x0, y0, x1, y1 = (int(round(v * scale)) for v in box)
    g = np.zeros((80 * scale, 80 * scale), bool)
    g[y0:y1, x0:x1] = True
    return g


def test_identical_boxes_have_zero_distance():
    a = Shape(box=(0, 0, 10, 10))
    assert iou_distance(a, a) == 0.0
    assert giou_distance(a, a) == 0.0


def test_cascaded_box_overlaps():
    x, y, z = (Shape(box=b) for b in [(0, 0, 10, 10), (3, 0, 13, 10), (6, 0, 16, 10)])
    assert iou_distance(x, y) == pytest.approx(1 - 70 / 130, abs=1e-12)
    assert iou_distance(x, z) == pytest.approx(1 - 40 / 160, abs=1e-12)


def test_disjoint_boxes_saturate_iou_but_not_giou():
    a = Shape(box=(0, 0, 1, 1))
    near = Shape(box=(2, 0, 3, 1))
    far = Shape(box=(20, 0, 21, 1))
    assert iou_distance(a, near) == iou_distance(a, far) == 1.0
    assert giou_distance(a, near) < giou_distance(a, far) < 1.0


def test_giou_of_unit_boxes_by_hand():
    # union 2, hull 3 -> GIoU = 0 - 1/3
    a, b = Shape(box=(0, 0, 1, 1)), Shape(box=(2, 0, 3, 1))
    assert giou_distance(a, b) == pytest.approx((1 + 1 / 3) / 2, abs=1e-12)


def test_mask_distance_matches_rasterised_box():
    a, b = (2, 3, 12, 9), (5, 1, 15, 7)
    ma = Shape(mask=raster(a, 1))
    mb = Shape(mask=raster(b, 1))
    assert iou_distance(ma, mb) == pytest.approx(iou_distance(Shape(box=a), Shape(box=b)), abs=1e-12)
    # the enclosing region of two masks is their convex hull, not the bounding box
    pa, pb = shapely.box(*a), shapely.box(*b)
    union = pa.union(pb)
    hull = union.convex_hull.area
    giou = pa.intersection(pb).area / union.area - (hull - union.area) / hull
    assert giou_distance(ma, mb) == pytest.approx((1 - giou) / 2, abs=1e-12)


def test_mask_origin_shifts_position():
    cell = np.ones((2, 2), bool)
    a = Shape(mask=cell, origin=(0, 0))
    b = Shape(mask=cell, origin=(1, 0))
    assert iou_distance(a, b) == pytest.approx(1 - 2 / 6)
    assert volume(a) == 4


def test_mixed_kinds_are_rejected():
    with pytest.raises(ShapeError):
        iou_distance(Shape(box=(0, 0, 1, 1)), Shape(mask=np.ones((1, 1), bool)))


@pytest.mark.parametrize("box", [(0, 0, 0, 1), (0, 0, 1, -1), (0, 0, np.inf, 1)])
def test_degenerate_boxes_are_rejected(box):
    with pytest.raises(ShapeError):
        Shape(box=box)


def test_score_outside_unit_interval_rejected():
    with pytest.raises(ShapeError):
        Shape(box=(0, 0, 1, 1), score=0.0)


def test_augmented_distance_of_equal_boxes_depends_on_scores():
    a = Shape(box=(0, 0, 10, 10), score=1.0)
    b = Shape(box=(0, 0, 10, 10), score=0.5)
    # volumes 100 and 50, the smaller nested in the larger
    assert augmented_distance(a, b) == pytest.approx(0.5)
    assert augmented_distance(a, a) == 0.0
    with pytest.raises(ShapeError):
        augmented_distance(a, Shape(box=(0, 0, 1, 1)))


def test_distance_threshold_conventions():
    assert distance_threshold("iou", 0.5) == 0.5
    assert distance_threshold("giou", 0.0) == 0.5
    assert distance_threshold("giou", -0.9) == pytest.approx(0.95)


def test_pairwise_matches_scalar_distance(rng):
    from conftest import random_set

    X, Y = random_set(rng, 5, scores=True), random_set(rng, 4, scores=True)
    for base in ("iou", "giou", "augmented-iou", "augmented-giou"):
        d = pairwise_distance(X, Y, base)
        for i in range(5):
            for j in range(4):
                assert d[i, j] == pytest.approx(distance(X[i], Y[j], base), abs=1e-12)


def test_shapeset_classes_and_subsets():
    S = ShapeSet.from_boxes([[0, 0, 1, 1], [1, 1, 2, 2], [2, 2, 3, 3]], classes=[1, 2, 1])
    assert S.class_ids() == [1, 2]
    assert len(S.of_class(1)) == 2
    assert not S.has_scores


@settings(max_examples=300, deadline=None)
@given(boxes(), boxes())
def test_distances_bounded_and_symmetric(a, b):
    for f in (iou_distance, giou_distance):
        d = f(a, b)
        assert -1e-12 <= d <= 1 + 1e-12
        assert d == pytest.approx(f(b, a), abs=1e-12)
    assert giou_distance(a, b) <= iou_distance(a, b) + 1e-12


@settings(max_examples=300, deadline=None)
@given(boxes(), boxes(), boxes())
def test_iou_and_giou_distances_obey_triangle_inequality(a, b, c):
    for f in (iou_distance, giou_distance):
        assert f(a, c) <= f(a, b) + f(b, c) + 1e-9
