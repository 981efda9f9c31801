"""
Satellite image time series and their on-disk layout.

A series is stored as one directory containing ``frame_####.pgm`` (8-bit
intensities), ``mask_####.pgm`` (zone labels 0..3) and a ``manifest.json``:

.. code-block:: json

    {
        "glacier_id": "synthetic-0003",
        "resolution_m_per_px": 50.0,
        "frames": [
            {"date": "2016-01-04", "image": "frame_0000.pgm", "mask": "mask_0000.pgm"}
        ]
    }

A dataset is a directory of series directories.
"""

from dataclasses import dataclass
from datetime import date
import logging
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
from PIL import Image

from gfkit.exceptions import GeometryError, ShapeError
from gfkit.frontline import Zone, ZoneMask

try:
    import ujson as json
except ImportError:  # pragma: no cover
    import json  # type: ignore

MANIFEST_NAME = "manifest.json"

# Grayscale rendering of the zones, from dark to bright
PALETTE = {Zone.NA: 0, Zone.ROCK: 85, Zone.GLACIER: 170, Zone.OIM: 255}


@dataclass
class Frame:
    image: np.ndarray
    mask: ZoneMask
    date: date


@dataclass
class SitsSample:
    """
    Co-registered frames of one site, ordered by strictly increasing date.

    :param frames: The frames of the series
    :type frames: List[Frame]

    :param resolution_m_per_px: Ground sampling distance shared by all frames
    :type resolution_m_per_px: float

    :param glacier_id: Identifier of the site
    :type glacier_id: str
    """

    frames: List[Frame]
    resolution_m_per_px: float
    glacier_id: str = "synthetic"

    def __post_init__(self) -> None:
        if not self.frames:
            raise ShapeError("a series needs at least one frame")

        shape = self.frames[0].image.shape

        for frame in self.frames:
            if frame.image.shape != shape or frame.mask.shape != shape:
                raise ShapeError(
                    f"frames of a series must share the grid {shape}, "
                    f"got {frame.image.shape} and {frame.mask.shape}"
                )

        dates = [frame.date for frame in self.frames]

        if any(later <= earlier for earlier, later in zip(dates, dates[1:])):
            raise GeometryError("frame dates must be strictly increasing")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def shape(self) -> tuple:
        return self.frames[0].image.shape

    def images(self) -> np.ndarray:
        return np.stack([frame.image for frame in self.frames]).astype(np.float64)

    def labels(self) -> np.ndarray:
        return np.stack([frame.mask.classes for frame in self.frames])

    def day_offsets(self) -> np.ndarray:
        """
        Days since the first frame, per frame.
        """

        first = self.frames[0].date
        return np.array(
            [(frame.date - first).days for frame in self.frames], np.float64
        )

    def window(self, start: int, length: int) -> "SitsSample":
        return SitsSample(
            self.frames[start : start + length],
            self.resolution_m_per_px,
            self.glacier_id,
        )

    def with_arrays(
        self, images: np.ndarray, labels: np.ndarray, resolution_m_per_px: float
    ) -> "SitsSample":
        """
        Return a copy of the series holding the given images and labels.
        """

        frames = [
            Frame(image, ZoneMask(label, resolution_m_per_px), frame.date)
            for image, label, frame in zip(images, labels, self.frames)
        ]
        return SitsSample(frames, resolution_m_per_px, self.glacier_id)


def render_mask(mask: ZoneMask) -> np.ndarray:
    """
    Render zone labels as an 8-bit grayscale image: NA black, rock dark
    gray, glacier light gray and OIM white.
    """

    lookup = np.array([PALETTE[zone] for zone in Zone], dtype=np.uint8)
    return lookup[mask.classes]


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_series(
    sample: SitsSample, directory: Union[str, Path], preview: bool = False
) -> Path:
    """
    Write a series into a directory, optionally with rendered masks.

    :return: Returns the series directory
    :rtype: Path
    """

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []

    for index, frame in enumerate(sample.frames):
        image_name = f"frame_{index:04d}.pgm"
        mask_name = f"mask_{index:04d}.pgm"

        Image.fromarray(to_uint8(frame.image), mode="L").save(directory / image_name)
        Image.fromarray(frame.mask.classes, mode="L").save(directory / mask_name)

        if preview:
            Image.fromarray(render_mask(frame.mask), mode="L").save(
                directory / f"preview_{index:04d}.pgm"
            )

        entries.append(
            {"date": frame.date.isoformat(), "image": image_name, "mask": mask_name}
        )

    manifest = {
        "glacier_id": sample.glacier_id,
        "resolution_m_per_px": sample.resolution_m_per_px,
        "frames": entries,
    }
    (directory / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2))

    logging.debug('Series "%s" written to "%s"', sample.glacier_id, directory)
    return directory


def read_series(directory: Union[str, Path]) -> SitsSample:
    """
    Read a series directory written by :func:`write_series` or converted to
    the same layout.

    :raises: ``GeometryError`` if the manifest is missing or inconsistent
    """

    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME

    if not manifest_path.exists():
        raise GeometryError(f'"{directory}" holds no {MANIFEST_NAME}')

    manifest = json.loads(manifest_path.read_text())
    resolution = float(manifest["resolution_m_per_px"])
    frames = []

    for entry in manifest["frames"]:
        image = np.asarray(Image.open(directory / entry["image"]), dtype=np.float64)
        labels = np.asarray(Image.open(directory / entry["mask"]), dtype=np.uint8)
        frames.append(
            Frame(
                image / 255.0,
                ZoneMask(labels, resolution),
                date.fromisoformat(entry["date"]),
            )
        )

    glacier_id = str(manifest.get("glacier_id", directory.name))
    return SitsSample(frames, resolution, glacier_id)


def write_dataset(
    samples: Sequence[SitsSample], directory: Union[str, Path], preview: bool = False
) -> Path:
    directory = Path(directory)

    for index, sample in enumerate(samples):
        write_series(sample, directory / f"series_{index:04d}", preview=preview)

    logging.info('Dataset of %d series written to "%s"', len(samples), directory)
    return directory


def read_dataset(directory: Union[str, Path]) -> List[SitsSample]:
    """
    Read every series directory below ``directory``, in name order.
    """

    directory = Path(directory)

    if not directory.is_dir():
        raise GeometryError(f'Dataset directory "{directory}" does not exist')

    samples = [
        read_series(child)
        for child in sorted(directory.iterdir())
        if (child / MANIFEST_NAME).exists()
    ]

    logging.info('Loaded %d series from "%s"', len(samples), directory)
    return samples
