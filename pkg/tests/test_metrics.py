import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfkit.exceptions import MissingFrontError, ShapeError
from gfkit.frontline import FrontSet, Zone, ZoneMask, extract_front
from gfkit.metrics import ConfusionCounts, MetricsReport, dataset_report, mde, miou
from tests.helpers import front_mask

points = st.lists(
    st.tuples(st.integers(0, 40), st.integers(0, 40)), min_size=1, max_size=30
)


def single_front(pairs, resolution=1.0):
    return FrontSet([np.array(pairs, dtype=np.int64).reshape(-1, 2)], resolution)


def brute_force_mde(p, q, resolution):
    p, q = np.asarray(p, float), np.asarray(q, float)
    forward = [min(np.hypot(*(a - b)) for b in q) for a in p]
    backward = [min(np.hypot(*(b - a)) for a in p) for b in q]
    return (sum(forward) + sum(backward)) / (len(p) + len(q)) * resolution


def test_miou_perfect():
    mask = ZoneMask([[0, 1], [2, 3]], 1.0)

    assert miou(mask, mask) == 1.0


def test_miou_partial():
    gt = ZoneMask([[0, 1], [2, 3]], 1.0)
    pred = ZoneMask([[0, 1], [2, 2]], 1.0)

    assert miou(gt, pred) == pytest.approx(0.625)


def test_miou_disjoint_classes():
    gt = ZoneMask(np.full((3, 3), Zone.GLACIER), 1.0)
    pred = ZoneMask(np.full((3, 3), Zone.OIM), 1.0)

    assert miou(gt, pred, classes={Zone.GLACIER, Zone.OIM}) == 0.0


def test_miou_rejects_size_mismatch():
    with pytest.raises(ShapeError):
        miou(ZoneMask(np.zeros((2, 2)), 1.0), ZoneMask(np.zeros((2, 3)), 1.0))


@given(
    gt=st.lists(st.integers(0, 3), min_size=9, max_size=9),
    pred=st.lists(st.integers(0, 3), min_size=9, max_size=9),
    permutation=st.permutations([0, 1, 2, 3]),
)
def test_miou_is_invariant_under_label_permutation(gt, pred, permutation):
    lookup = np.array(permutation)
    gt_classes = np.array(gt).reshape(3, 3)
    pred_classes = np.array(pred).reshape(3, 3)

    original = miou(ZoneMask(gt_classes, 1.0), ZoneMask(pred_classes, 1.0))
    permuted = miou(
        ZoneMask(lookup[gt_classes], 1.0), ZoneMask(lookup[pred_classes], 1.0)
    )

    assert original == pytest.approx(permuted)
    assert 0.0 <= original <= 1.0


def test_confusion_counts_add_up():
    gt = ZoneMask(np.random.default_rng(0).integers(0, 4, size=(5, 6)), 1.0)
    pred = ZoneMask(np.random.default_rng(1).integers(0, 4, size=(5, 6)), 1.0)

    counts = ConfusionCounts.from_masks(gt, pred)

    assert (counts.tp + counts.fn).sum() == 30
    assert (counts.tp + counts.fp).sum() == 30
    per_class = np.bincount(gt.classes.ravel(), minlength=4)
    assert np.array_equal(counts.tp + counts.fn, per_class)


def test_mde_identical_fronts():
    front = single_front([[0, 0], [0, 1], [1, 2]])

    assert mde(front, front) == 0.0


def test_mde_hand_computed():
    assert mde(single_front([[0, 0]], 2.0), single_front([[3, 4]], 2.0)) == 10.0


def test_mde_uneven_point_counts():
    gt = single_front([[0, 0], [10, 0]])
    pred = single_front([[0, 0]])

    assert mde(gt, pred) == pytest.approx(10.0 / 3.0)


def test_mde_pools_all_polylines():
    gt = FrontSet([np.array([[0, 0], [0, 1]]), np.array([[5, 5], [5, 6]])], 1.0)
    pred = single_front([[0, 0], [0, 1]])

    expected = brute_force_mde([[0, 0], [0, 1], [5, 5], [5, 6]], [[0, 0], [0, 1]], 1.0)

    assert mde(gt, pred) == pytest.approx(expected)


@settings(max_examples=50)
@given(p=points, q=points)
def test_mde_is_exactly_symmetric(p, q):
    forward = mde(single_front(p), single_front(q))
    backward = mde(single_front(q), single_front(p))

    assert forward == backward


@settings(max_examples=50)
@given(p=points, q=points)
def test_mde_matches_brute_force(p, q):
    assert mde(single_front(p, 3.0), single_front(q, 3.0)) == pytest.approx(
        brute_force_mde(p, q, 3.0)
    )


def test_mde_scales_with_resolution():
    p, q = [[0, 0], [2, 3]], [[1, 1], [7, 2]]

    assert mde(single_front(p, 5.0), single_front(q, 5.0)) == pytest.approx(
        5.0 * mde(single_front(p), single_front(q))
    )


def test_mde_missing_prediction():
    with pytest.raises(MissingFrontError) as exc:
        mde(single_front([[0, 0]]), FrontSet())

    assert not exc.value.ground_truth_empty


def test_mde_missing_ground_truth():
    with pytest.raises(MissingFrontError) as exc:
        mde(FrontSet(), single_front([[0, 0]]))

    assert exc.value.ground_truth_empty


def test_report_of_perfect_predictions():
    mask = front_mask()
    pairs = [(mask, mask, extract_front(mask)), (mask, mask, extract_front(mask))]

    report = dataset_report(pairs)

    assert report.mde_m == 0.0
    assert report.empty_count == 0
    assert report.images_evaluated == 2
    assert report.iou_all == 1.0
    assert report.mde_ma_m is None


def test_report_excludes_empty_predictions_from_mde():
    gt = front_mask(front_row=8)
    shifted = front_mask(front_row=9)
    empty = ZoneMask(np.full((16, 16), Zone.GLACIER), 100.0)
    pairs = [(gt, shifted, extract_front(gt)), (gt, empty, extract_front(gt))]

    report = dataset_report(pairs)

    assert report.empty_count == 1
    assert report.images_evaluated == 1
    assert report.mde_m == pytest.approx(100.0)


def test_report_pools_confusion_counts():
    small_gt = ZoneMask([[Zone.GLACIER, Zone.OIM]], 1.0)
    small_pred = ZoneMask([[Zone.GLACIER, Zone.GLACIER]], 1.0)
    large = ZoneMask(np.full((4, 4), Zone.OIM), 1.0)
    pairs = [
        (small_gt, small_pred, FrontSet()),
        (large, large, FrontSet()),
    ]

    report = dataset_report(pairs, min_length_m=0.0)

    assert report.iou_oim == pytest.approx(16.0 / 17.0)
    assert report.iou_glacier == pytest.approx(0.5)
    assert report.iou_na == 1.0
    assert report.iou_all == pytest.approx((1.0 + 1.0 + 0.5 + 16.0 / 17.0) / 4)
    assert report.mde_m is None
    assert report.empty_count == 2


def test_report_with_alternative_fronts_and_rock_mask():
    gt = front_mask()
    pred = front_mask()
    pred.classes[:, :5] = Zone.ROCK
    rock_classes = np.zeros((16, 16), dtype=np.uint8)
    rock_classes[:, :5] = Zone.ROCK
    rock = ZoneMask(rock_classes, 100.0)
    ma_fronts = [extract_front(gt, rock_mask=rock)]

    report = dataset_report([(gt, pred, extract_front(gt))], ma_fronts, rock)

    assert report.mde_ma_m == 0.0
    assert report.mde_m > 0.0


def test_report_requires_frames():
    with pytest.raises(ShapeError):
        dataset_report([])


def test_report_rejects_mismatched_alternative_fronts():
    mask = front_mask()

    with pytest.raises(ShapeError):
        dataset_report([(mask, mask, extract_front(mask))], ma_fronts=[])


def test_report_defaults():
    assert MetricsReport().mde_m is None
