"""
This module contains the training augmentations. Geometric augmentations are
drawn once per series and applied to every frame and mask alike; photometric
augmentations are drawn per frame and only touch the image. Mixing
augmentations blend the series with a donor series of the same shape.

.. note::

    Every augmentation consumes its random draw even when an earlier one was
    skipped, so the outcome of a pipeline only depends on the generator state.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
import logging
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, validator  # pylint: disable=no-name-in-module
from scipy import ndimage

from gfkit.synth.dataset import SitsSample

Box = Tuple[int, int, int, int]


class AugmentConfig(BaseModel):
    flip: float = 0.5
    rotate: float = 0.5
    crop_zoom: float = 0.3
    brightness: float = 0.2
    contrast: float = 0.2
    gamma: float = 0.2
    mixup: float = 0.1
    cutmix: float = 0.1
    erasure: float = 0.1
    noise: float = 0.2

    mixup_alpha: float = 0.2
    noise_std: float = 0.05
    min_zoom_crop: float = 0.7

    @validator(
        "flip",
        "rotate",
        "crop_zoom",
        "brightness",
        "contrast",
        "gamma",
        "mixup",
        "cutmix",
        "erasure",
        "noise",
    )
    def check_probability(cls, value):  # pylint: disable=no-self-argument
        if not 0.0 <= value <= 1.0:
            raise ValueError("probabilities must be within [0, 1]")

        return value

    @validator("mixup_alpha", "noise_std")
    def check_positive(cls, value):  # pylint: disable=no-self-argument
        if value <= 0:
            raise ValueError("must be positive")

        return value

    @validator("min_zoom_crop")
    def check_crop(cls, value):  # pylint: disable=no-self-argument
        if not 0.0 < value < 1.0:
            raise ValueError("must be within (0, 1)")

        return value

    @classmethod
    def disabled(cls) -> "AugmentConfig":
        return cls(
            flip=0,
            rotate=0,
            crop_zoom=0,
            brightness=0,
            contrast=0,
            gamma=0,
            mixup=0,
            cutmix=0,
            erasure=0,
            noise=0,
        )


@dataclass
class SeriesArrays:
    """
    Array view of a series while it is augmented: images ``(T, H, W)``,
    labels ``(T, H, W)`` and the ground sampling distance.
    """

    images: np.ndarray
    labels: np.ndarray
    resolution_m_per_px: float
    donor: Optional["SeriesArrays"] = None

    @classmethod
    def from_sample(cls, sample: SitsSample) -> "SeriesArrays":
        return cls(sample.images(), sample.labels(), sample.resolution_m_per_px)


class Augmentation(ABC):
    """
    Base of the augmentations. ``execute`` draws from the generator and runs
    :func:`Augmentation.task` if the draw is below the probability.

    :param probability: Chance of applying the augmentation
    :type probability: float
    """

    def __init__(self, probability: float) -> None:
        self.probability = probability

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(probability={self.probability})"

    @abstractmethod
    def task(self, series: SeriesArrays, rng: np.random.Generator) -> SeriesArrays:
        """
        Transform the series; called only when the draw succeeded.
        """

    def execute(self, series: SeriesArrays, rng: np.random.Generator) -> SeriesArrays:
        if rng.random() >= self.probability:
            return series

        logging.debug("Applying %s", self.__class__.__name__)
        return self.task(series, rng)


class FrameAugmentation(Augmentation):
    """
    Augmentation drawn independently for every frame of the series.
    """

    @abstractmethod
    def transform(self, image: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """
        Transform the image of one frame.
        """

    def task(self, series: SeriesArrays, rng: np.random.Generator) -> SeriesArrays:
        images = np.stack([self.transform(image, rng) for image in series.images])
        return replace(series, images=images)

    def execute(self, series: SeriesArrays, rng: np.random.Generator) -> SeriesArrays:
        images = series.images.copy()

        for index, image in enumerate(images):
            if rng.random() < self.probability:
                images[index] = self.transform(image, rng)

        return replace(series, images=images)


class HorizontalFlip(Augmentation):
    def task(self, series: SeriesArrays, rng: np.random.Generator) -> SeriesArrays:
        return replace(
            series,
            images=series.images[:, :, ::-1].copy(),
            labels=series.labels[:, :, ::-1].copy(),
        )


class VerticalFlip(Augmentation):
    def task(self, series: SeriesArrays, rng: np.random.Generator) -> SeriesArrays:
        return replace(
            series,
            images=series.images[:, ::-1].copy(),
            labels=series.labels[:, ::-1].copy(),
        )


class Rotate90(Augmentation):
    def task(self, series: SeriesArrays, rng: np.random.Generator) -> SeriesArrays:
        turns = int(rng.integers(1, 4))
        return replace(
            series,
            images=np.rot90(series.images, turns, axes=(1, 2)).copy(),
            labels=np.rot90(series.labels, turns, axes=(1, 2)).copy(),
        )


class CropZoom(Augmentation):
    """
    Crop a square fraction ``s`` in ``[min_crop, 1)`` of the frames and
    resize it back, dividing the ground sampling distance by the zoom.
    """

    def __init__(self, probability: float, min_crop: float = 0.7) -> None:
        super().__init__(probability)
        self.min_crop = min_crop

    def task(self, series: SeriesArrays, rng: np.random.Generator) -> SeriesArrays:
        _, height, width = series.images.shape
        fraction = rng.uniform(self.min_crop, 1.0)
        crop_h = max(1, int(fraction * height))
        crop_w = max(1, int(fraction * width))
        top = int(rng.integers(0, height - crop_h + 1))
        left = int(rng.integers(0, width - crop_w + 1))

        window = (slice(None), slice(top, top + crop_h), slice(left, left + crop_w))
        factors = (1.0, height / crop_h, width / crop_w)

        images = ndimage.zoom(series.images[window], factors, order=1, mode="nearest")
        labels = ndimage.zoom(series.labels[window], factors, order=0, mode="nearest")

        return replace(
            series,
            images=images[:, :height, :width],
            labels=labels[:, :height, :width],
            resolution_m_per_px=series.resolution_m_per_px * crop_h / height,
        )


class Brightness(FrameAugmentation):
    def transform(self, image: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return image * (1.0 + rng.uniform(-0.2, 0.2))


class Contrast(FrameAugmentation):
    def transform(self, image: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        mean = image.mean()
        return mean + (image - mean) * rng.uniform(0.8, 1.25)


class Gamma(FrameAugmentation):
    def transform(self, image: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return np.clip(image, 0.0, 1.0) ** rng.uniform(0.8, 1.25)


class Erasure(FrameAugmentation):
    """
    Fill a random box covering 2% to 20% of the frame with a constant.
    """

    def transform(self, image: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        height, width = image.shape
        top, left, box_h, box_w = random_box(height, width, rng.uniform(0.02, 0.2), rng)
        image = image.copy()
        image[top : top + box_h, left : left + box_w] = rng.uniform(0.0, 1.0)
        return image


class GaussianNoise(FrameAugmentation):
    def __init__(self, probability: float, std: float = 0.05) -> None:
        super().__init__(probability)
        self.std = std

    def transform(self, image: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return image + rng.normal(0.0, self.std, size=image.shape)


class Mixup(Augmentation):
    """
    Blend the series with the donor frame by frame using one shared weight
    ``lam ~ Beta(alpha, alpha)``; the labels of the dominant series are kept.
    """

    def __init__(self, probability: float, alpha: float = 0.2) -> None:
        super().__init__(probability)
        self.alpha = alpha

    def task(self, series: SeriesArrays, rng: np.random.Generator) -> SeriesArrays:
        lam = rng.beta(self.alpha, self.alpha)

        if series.donor is None:
            return series

        return mixup(series, series.donor, lam)


class CutMix(Augmentation):
    def task(self, series: SeriesArrays, rng: np.random.Generator) -> SeriesArrays:
        _, height, width = series.images.shape
        box = random_box(height, width, rng.uniform(0.1, 0.5), rng)

        if series.donor is None:
            return series

        return cutmix(series, series.donor, box)


def random_box(
    height: int, width: int, area_fraction: float, rng: np.random.Generator
) -> Box:
    """
    Random box ``(top, left, height, width)`` of roughly the given area share.
    """

    side = np.sqrt(area_fraction)
    box_h = max(1, int(round(side * height)))
    box_w = max(1, int(round(side * width)))
    top = int(rng.integers(0, height - box_h + 1))
    left = int(rng.integers(0, width - box_w + 1))
    return top, left, box_h, box_w


def mixup(series: SeriesArrays, donor: SeriesArrays, lam: float) -> SeriesArrays:
    """
    Blend the images; labels and ground sampling distance come from the
    series with the larger weight.
    """

    images = lam * series.images + (1.0 - lam) * donor.images
    dominant = series if lam >= 0.5 else donor
    return replace(
        series,
        images=images,
        labels=dominant.labels.copy(),
        resolution_m_per_px=dominant.resolution_m_per_px,
    )


def cutmix(series: SeriesArrays, donor: SeriesArrays, box: Box) -> SeriesArrays:
    """
    Paste the same box of the donor into every frame and mask.
    """

    top, left, box_h, box_w = box
    region = (slice(None), slice(top, top + box_h), slice(left, left + box_w))

    images = series.images.copy()
    labels = series.labels.copy()
    images[region] = donor.images[region]
    labels[region] = donor.labels[region]

    return replace(series, images=images, labels=labels)


def build_pipeline(cfg: AugmentConfig) -> List[Augmentation]:
    return [
        HorizontalFlip(cfg.flip),
        VerticalFlip(cfg.flip),
        Rotate90(cfg.rotate),
        CropZoom(cfg.crop_zoom, cfg.min_zoom_crop),
        Mixup(cfg.mixup, cfg.mixup_alpha),
        CutMix(cfg.cutmix),
        Brightness(cfg.brightness),
        Contrast(cfg.contrast),
        Gamma(cfg.gamma),
        Erasure(cfg.erasure),
        GaussianNoise(cfg.noise, cfg.noise_std),
    ]


def augment_arrays(
    series: SeriesArrays, cfg: AugmentConfig, rng: np.random.Generator
) -> SeriesArrays:
    for augmentation in build_pipeline(cfg):
        series = augmentation.execute(series, rng)

    return replace(series, images=np.clip(series.images, 0.0, 1.0), donor=None)


def augment(
    sample: SitsSample,
    cfg: AugmentConfig,
    rng: np.random.Generator,
    donor: Optional[SitsSample] = None,
) -> SitsSample:
    """
    Augment a series.

    Example usage:

    .. code-block:: python

        >>> import numpy as np
        >>> from gfkit.training.augment import AugmentConfig, augment
        >>>
        >>> augmented = augment(sample, AugmentConfig(), np.random.default_rng(0))

    :param sample: The series to augment
    :type sample: SitsSample

    :param cfg: Augmentation probabilities
    :type cfg: AugmentConfig

    :param rng: Random generator driving every draw
    :type rng: np.random.Generator

    :param donor: Series of the same shape used by the mixing augmentations
    :type donor: Optional[SitsSample]

    :return: Returns the augmented series
    :rtype: SitsSample
    """

    series = SeriesArrays.from_sample(sample)

    if donor is not None and donor.images().shape == series.images.shape:
        series.donor = SeriesArrays.from_sample(donor)

    result = augment_arrays(series, cfg, rng)
    return sample.with_arrays(result.images, result.labels, result.resolution_m_per_px)
