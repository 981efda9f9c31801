from pathlib import Path

import numpy as np
import pytest

from gfkit.exceptions import GeometryError, ShapeError
from gfkit.frontline import (
    MIN_FRONT_LENGTH_M,
    FrontSet,
    Zone,
    ZoneMask,
    boundary_pixels,
    clean_mask,
    extract_front,
    fill_holes,
    largest_component,
    polyline_length,
)
from tests.fixtures import temporary_dir
from tests.helpers import front_mask

assert temporary_dir


def stepped_mask(resolution: float = 100.0) -> ZoneMask:
    rows = np.arange(16)[:, None]
    front = np.array([6, 6, 7, 7, 8, 9, 9, 9, 8, 8, 7, 6, 6, 5, 5, 5])
    classes = np.where(rows < front[None, :], Zone.GLACIER, Zone.OIM)
    classes[:2] = Zone.NA
    return ZoneMask(classes, resolution)


def point_set(fronts: FrontSet):
    return {tuple(point) for point in fronts.points().tolist()}


def test_zone_mask_validation():
    with pytest.raises(GeometryError):
        ZoneMask(np.full((2, 2), 4), 1.0)

    with pytest.raises(ShapeError):
        ZoneMask(np.zeros(4), 1.0)

    with pytest.raises(GeometryError):
        ZoneMask(np.zeros((2, 2)), 0.0)


def test_straight_front():
    fronts = extract_front(front_mask())

    assert fronts.lengths_m() == [1500.0]
    assert point_set(fronts) == {(8, col) for col in range(16)}


def test_only_the_largest_oim_blob_survives():
    classes = np.full((8, 8), Zone.GLACIER, dtype=np.uint8)
    classes[5:7, 0:3] = Zone.OIM
    classes[1, 5:8] = Zone.OIM

    fronts = extract_front(ZoneMask(classes, 100.0), min_length_m=0.0)
    points = point_set(fronts)

    assert points
    assert all(5 <= row <= 6 and col <= 2 for row, col in points)


def test_all_glacier_has_no_front():
    mask = ZoneMask(np.full((8, 8), Zone.GLACIER), 100.0)

    assert extract_front(mask).is_empty


def test_ocean_without_glacier_has_no_front():
    classes = np.full((8, 8), Zone.OIM)
    classes[:4] = Zone.ROCK

    assert extract_front(ZoneMask(classes, 100.0)).is_empty


@pytest.mark.parametrize("resolution,kept", [(100.0, True), (90.0, False)])
def test_length_threshold(resolution, kept):
    classes = np.full((8, 9), Zone.GLACIER, dtype=np.uint8)
    classes[4:] = Zone.OIM

    fronts = extract_front(ZoneMask(classes, resolution))

    assert MIN_FRONT_LENGTH_M == 750.0
    assert (not fronts.is_empty) == kept


def test_narrow_inlet_keeps_the_whole_front():
    classes = np.full((16, 12), Zone.GLACIER, dtype=np.uint8)
    classes[8:] = Zone.OIM
    classes[5:8, 5] = Zone.OIM

    fronts = extract_front(ZoneMask(classes, 80.0))

    assert not fronts.is_empty
    assert len(fronts.polylines) > 1
    assert sum(fronts.lengths_m()) >= MIN_FRONT_LENGTH_M
    assert point_set(fronts) == {(8, col) for col in range(12) if col != 5} | {
        (row, 5) for row in range(5, 8)
    }


def test_dropping_the_filter_never_loses_fronts():
    mask = stepped_mask(resolution=20.0)

    filtered = extract_front(mask)
    unfiltered = extract_front(mask, min_length_m=0.0)

    assert len(unfiltered.polylines) >= len(filtered.polylines)


def test_glacier_island_inside_the_ocean_is_filled():
    mask = front_mask()
    mask.classes[11:13, 6:8] = Zone.GLACIER

    cleaned = clean_mask(mask)
    fronts = extract_front(mask)

    assert (cleaned.classes[8:] == Zone.OIM).all()
    assert point_set(fronts) == {(8, col) for col in range(16)}


def test_rock_mask_overwrites_predictions():
    rock = np.zeros((16, 16), dtype=np.uint8)
    rock[:, :5] = Zone.ROCK

    fronts = extract_front(front_mask(), rock_mask=ZoneMask(rock, 100.0))

    assert point_set(fronts) == {(8, col) for col in range(5, 16)}


def test_rock_mask_must_match():
    with pytest.raises(ShapeError):
        extract_front(front_mask(), rock_mask=ZoneMask(np.zeros((4, 4)), 100.0))


def test_extraction_is_idempotent():
    mask = stepped_mask()
    mask.classes[14, 1] = Zone.GLACIER
    mask.classes[3, 14] = Zone.OIM

    first = extract_front(mask)
    second = extract_front(clean_mask(mask))

    assert len(first.polylines) == len(second.polylines)
    for a, b in zip(first.polylines, second.polylines):
        assert np.array_equal(a, b)


def test_points_lie_on_the_border():
    mask = stepped_mask()
    cleaned = clean_mask(mask).classes
    glacier = np.pad(cleaned == Zone.GLACIER, 1)

    for row, col in extract_front(mask).points().tolist():
        assert cleaned[row, col] == Zone.OIM
        assert (
            glacier[row, col + 1]
            or glacier[row + 2, col + 1]
            or glacier[row + 1, col]
            or glacier[row + 1, col + 2]
        )


def test_polylines_are_eight_connected():
    for line in extract_front(stepped_mask()).polylines:
        assert len(line) >= 2
        assert np.abs(np.diff(line, axis=0)).max() == 1


def test_flip_commutes_with_extraction():
    mask = stepped_mask()
    flipped = mask.copy(np.fliplr(mask.classes).copy())

    original = point_set(extract_front(mask, min_length_m=0.0))
    mirrored = point_set(extract_front(flipped, min_length_m=0.0))

    assert mirrored == {(row, 15 - col) for row, col in original}


def test_na_and_rock_relabeling_far_from_ocean():
    mask = stepped_mask()
    relabeled = mask.copy()
    relabeled.classes[:2] = Zone.ROCK

    assert point_set(extract_front(mask)) == point_set(extract_front(relabeled))


def test_fill_holes_keeps_solid_square():
    square = np.zeros((6, 6), dtype=bool)
    square[1:5, 1:5] = True

    assert np.array_equal(fill_holes(square), square)


def test_fill_holes_turns_ring_into_disk():
    ring = np.zeros((7, 7), dtype=bool)
    ring[1:6, 1:6] = True
    disk = ring.copy()
    ring[2:5, 2:5] = False

    assert np.array_equal(fill_holes(ring), disk)


def test_fill_holes_keeps_c_shape_open_to_the_border():
    shape = np.zeros((7, 7), dtype=bool)
    shape[1:6, 1:6] = True
    shape[2:5, 2:5] = False
    shape[3, 5] = False
    shape[3, 6] = False

    assert np.array_equal(fill_holes(shape), shape)


def test_largest_component_breaks_ties_by_raster_order():
    binary = np.zeros((4, 6), dtype=bool)
    binary[2, 0:2] = True
    binary[0, 4:6] = True

    kept = largest_component(binary)

    assert kept[0, 4] and kept[0, 5]
    assert not kept[2].any()


def test_boundary_uses_edge_neighbours():
    classes = np.full((3, 3), Zone.OIM, dtype=np.uint8)
    classes[0, 0] = Zone.GLACIER

    boundary = boundary_pixels(classes)

    assert boundary.sum() == 2
    assert boundary[0, 1] and boundary[1, 0]


def test_polyline_length_counts_diagonals():
    line = np.array([[0, 0], [0, 1], [1, 2], [2, 2]])

    assert polyline_length(line) == pytest.approx(2.0 + np.sqrt(2.0))
    assert polyline_length(line[:1]) == 0.0


def test_front_set_json(temporary_dir):
    fronts = FrontSet([np.array([[3, 1], [3, 2], [4, 3]])], 50.0)
    path = Path(temporary_dir) / "fronts.json"

    fronts.write(path)
    loaded = FrontSet.read(path)

    assert fronts.to_dict() == {
        "resolution_m_per_px": 50.0,
        "fronts": [[[1, 3], [2, 3], [3, 4]]],
    }
    assert loaded.resolution_m_per_px == 50.0
    assert np.array_equal(loaded.polylines[0], fronts.polylines[0])
