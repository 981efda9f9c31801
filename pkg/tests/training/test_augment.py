from dataclasses import replace

import numpy as np
import pydantic
import pytest

from gfkit.frontline import ZoneMask, extract_front
from gfkit.synth.scene import generate
from gfkit.training.augment import (
    AugmentConfig,
    CropZoom,
    HorizontalFlip,
    Mixup,
    Rotate90,
    SeriesArrays,
    augment,
    cutmix,
    mixup,
    random_box,
)
from tests.helpers import small_scene


@pytest.fixture
def sample():
    return generate(small_scene(seed=3), 3)


def only(**probabilities) -> AugmentConfig:
    return AugmentConfig.disabled().copy(update=probabilities)


def test_disabled_pipeline_is_identity(sample):
    result = augment(sample, AugmentConfig.disabled(), np.random.default_rng(0))

    assert np.array_equal(result.images(), sample.images())
    assert np.array_equal(result.labels(), sample.labels())
    assert result.resolution_m_per_px == sample.resolution_m_per_px
    assert [f.date for f in result.frames] == [f.date for f in sample.frames]


def test_flips_apply_to_frames_and_masks_alike(sample):
    result = augment(sample, only(flip=1.0), np.random.default_rng(0))

    assert np.array_equal(result.images(), sample.images()[:, ::-1, ::-1])
    assert np.array_equal(result.labels(), sample.labels()[:, ::-1, ::-1])


def test_rotation_turns_frames_and_masks_alike(sample):
    series = SeriesArrays.from_sample(sample)

    result = Rotate90(1.0).execute(series, np.random.default_rng(5))
    turns = [
        k
        for k in range(1, 4)
        if np.array_equal(np.rot90(series.images, k, axes=(1, 2)), result.images)
    ]

    assert len(turns) == 1
    assert np.array_equal(
        np.rot90(series.labels, turns[0], axes=(1, 2)), result.labels
    )


def test_crop_zoom_keeps_shape_and_rescales_resolution(sample):
    series = SeriesArrays.from_sample(sample)

    result = CropZoom(1.0, min_crop=0.5).execute(series, np.random.default_rng(2))

    assert result.images.shape == series.images.shape
    assert result.labels.shape == series.labels.shape
    assert result.resolution_m_per_px < series.resolution_m_per_px
    assert set(np.unique(result.labels)) <= set(np.unique(series.labels))


def test_photometric_augmentations_leave_masks_alone(sample):
    cfg = only(brightness=1.0, contrast=1.0, gamma=1.0, erasure=1.0, noise=1.0)

    result = augment(sample, cfg, np.random.default_rng(0))

    assert np.array_equal(result.labels(), sample.labels())
    assert not np.array_equal(result.images(), sample.images())
    assert result.images().min() >= 0.0 and result.images().max() <= 1.0


def test_same_generator_same_augmentation(sample):
    donor = generate(small_scene(seed=8), 3)

    first = augment(sample, AugmentConfig(), np.random.default_rng(1), donor=donor)
    second = augment(sample, AugmentConfig(), np.random.default_rng(1), donor=donor)

    assert np.array_equal(first.images(), second.images())
    assert np.array_equal(first.labels(), second.labels())


def test_mixup_keeps_the_dominant_labels(sample):
    series = SeriesArrays.from_sample(sample)
    donor = SeriesArrays.from_sample(generate(small_scene(seed=8), 3))

    mostly_series = mixup(series, donor, 0.7)
    mostly_donor = mixup(series, donor, 0.3)

    assert np.allclose(mostly_series.images, 0.7 * series.images + 0.3 * donor.images)
    assert np.array_equal(mostly_series.labels, series.labels)
    assert np.array_equal(mostly_donor.labels, donor.labels)


def test_mixup_resolution_follows_the_labels(sample):
    series = SeriesArrays.from_sample(sample)
    donor = replace(SeriesArrays.from_sample(sample), resolution_m_per_px=80.0)

    assert mixup(series, donor, 0.7).resolution_m_per_px == sample.resolution_m_per_px
    assert mixup(series, donor, 0.3).resolution_m_per_px == 80.0


def test_mixup_without_donor(sample):
    series = SeriesArrays.from_sample(sample)

    result = Mixup(1.0).execute(series, np.random.default_rng(0))

    assert result is series


def test_cutmix_pastes_one_box_into_every_frame(sample):
    series = SeriesArrays.from_sample(sample)
    donor = SeriesArrays.from_sample(generate(small_scene(seed=8), 3))

    result = cutmix(series, donor, (4, 6, 5, 7))
    inside = np.zeros(series.images.shape[1:], dtype=bool)
    inside[4:9, 6:13] = True

    assert np.array_equal(result.images[:, inside], donor.images[:, inside])
    assert np.array_equal(result.labels[:, inside], donor.labels[:, inside])
    assert np.array_equal(result.images[:, ~inside], series.images[:, ~inside])
    assert np.array_equal(result.labels[:, ~inside], series.labels[:, ~inside])


@pytest.mark.parametrize("seed", range(5))
def test_random_box_fits(seed):
    rng = np.random.default_rng(seed)

    top, left, height, width = random_box(20, 30, rng.uniform(0.02, 0.5), rng)

    assert 0 <= top and top + height <= 20
    assert 0 <= left and left + width <= 30
    assert height >= 1 and width >= 1


def test_invalid_probability():
    with pytest.raises(pydantic.ValidationError):
        AugmentConfig(flip=1.5)


def test_horizontal_flip_commutes_with_front_extraction(sample):
    series = SeriesArrays.from_sample(sample)
    width = series.labels.shape[2]

    flipped = HorizontalFlip(1.0).execute(series, np.random.default_rng(0))

    for original, mirrored in zip(series.labels, flipped.labels):
        before = extract_front(ZoneMask(original, 50.0), min_length_m=0.0).points()
        after = extract_front(ZoneMask(mirrored, 50.0), min_length_m=0.0).points()
        expected = {(row, width - 1 - col) for row, col in before.tolist()}

        assert {tuple(point) for point in after.tolist()} == expected
