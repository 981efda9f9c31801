"""
Extraction of calving fronts from zone segmentation masks.

A zone mask assigns every pixel one of four classes. The calving front is
the border between the ocean and ice mélange class (OIM) and the glacier.
Post-processing keeps the largest 4-connected OIM component, fills its
holes, and traces the OIM pixels touching glacier into 8-connected
polylines. Fronts shorter than a minimum length in meters are deleted.
"""

from dataclasses import dataclass, field
from enum import IntEnum
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Set, Tuple, Union

import numpy as np
from scipy import ndimage

from gfkit.exceptions import GeometryError, ShapeError

try:
    import ujson as json
except ImportError:  # pragma: no cover
    import json  # type: ignore

MIN_FRONT_LENGTH_M = 750.0

FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)
EIGHT_CONNECTED = ndimage.generate_binary_structure(2, 2)

# Neighbour offsets tried while tracing: edge neighbours before corners
_EDGE_STEPS = ((-1, 0), (0, 1), (1, 0), (0, -1))
_CORNER_STEPS = ((-1, 1), (1, 1), (1, -1), (-1, -1))
_STEPS = _EDGE_STEPS + _CORNER_STEPS

Pixel = Tuple[int, int]


class Zone(IntEnum):
    NA = 0
    ROCK = 1
    GLACIER = 2
    OIM = 3


NUM_ZONES = len(Zone)


@dataclass
class ZoneMask:
    """
    Per-pixel zone labels of one frame.

    :param classes: Labels of shape ``(H, W)`` with values in ``0..3``
    :type classes: np.ndarray

    :param resolution_m_per_px: Ground sampling distance
    :type resolution_m_per_px: float
    """

    classes: np.ndarray
    resolution_m_per_px: float

    def __post_init__(self) -> None:
        self.classes = np.asarray(self.classes, dtype=np.uint8)

        if self.classes.ndim != 2 or self.classes.size == 0:
            raise ShapeError(
                f"a zone mask must be a nonempty 2D map, got {self.classes.shape}"
            )

        if self.classes.max() >= NUM_ZONES:
            raise GeometryError(f"zone labels must be within 0..{NUM_ZONES - 1}")

        if self.resolution_m_per_px <= 0:
            raise GeometryError("resolution must be positive")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.classes.shape  # type: ignore

    def copy(self, classes: Optional[np.ndarray] = None) -> "ZoneMask":
        return ZoneMask(
            self.classes.copy() if classes is None else classes,
            self.resolution_m_per_px,
        )


@dataclass
class FrontSet:
    """
    Calving fronts of one frame. Every polyline is an ``(K, 2)`` integer array
    of ``(row, column)`` pixel coordinates with ``K >= 2``, where consecutive
    points are 8-neighbours.
    """

    polylines: List[np.ndarray] = field(default_factory=list)
    resolution_m_per_px: float = 1.0

    @property
    def is_empty(self) -> bool:
        return not self.polylines

    def points(self) -> np.ndarray:
        """
        All points of all polylines, pooled as an ``(M, 2)`` array.
        """

        if not self.polylines:
            return np.zeros((0, 2), dtype=np.int64)

        return np.concatenate(self.polylines, axis=0)

    def lengths_m(self) -> List[float]:
        return [
            polyline_length(line) * self.resolution_m_per_px for line in self.polylines
        ]

    def to_dict(self) -> Dict[str, Any]:
        """
        Serializable form with ``[x, y]`` points, ``x`` being the column.
        """

        return {
            "resolution_m_per_px": self.resolution_m_per_px,
            "fronts": [
                [[int(col), int(row)] for row, col in line] for line in self.polylines
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FrontSet":
        polylines = [
            np.array([[y, x] for x, y in line], dtype=np.int64).reshape(-1, 2)
            for line in data.get("fronts", [])
        ]
        return cls(polylines, float(data["resolution_m_per_px"]))

    def write(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def read(cls, path: Union[str, Path]) -> "FrontSet":
        return cls.from_dict(json.loads(Path(path).read_text()))


def polyline_length(line: np.ndarray) -> float:
    """
    Geodesic length of a polyline in pixels: edge steps count 1, diagonal
    steps count sqrt(2).
    """

    if len(line) < 2:
        return 0.0

    steps = np.abs(np.diff(line, axis=0)).sum(axis=1)
    return float(np.where(steps == 2, np.sqrt(2.0), 1.0).sum())


def fill_holes(component: np.ndarray) -> np.ndarray:
    """
    Turn every background region which is not 4-connected to the image
    border into foreground.

    :param component: Binary map
    :type component: np.ndarray

    :return: Returns the filled binary map
    :rtype: np.ndarray
    """

    return ndimage.binary_fill_holes(component.astype(bool), structure=FOUR_CONNECTED)


def largest_component(binary: np.ndarray) -> np.ndarray:
    """
    Keep the largest 4-connected component of a binary map. On equal sizes
    the component containing the first pixel in raster order wins.
    """

    labels, count = ndimage.label(binary, structure=FOUR_CONNECTED)

    if not count:
        return np.zeros(binary.shape, dtype=bool)

    sizes = np.bincount(labels.ravel())[1:]

    # Labels are assigned in raster order, so argmax breaks ties by top-left pixel
    return labels == int(np.argmax(sizes)) + 1


def clean_mask(mask: ZoneMask, rock_mask: Optional[ZoneMask] = None) -> ZoneMask:
    """
    Apply the post-processing of the zone labels: overwrite with the static
    rock mask, relabel all but the largest OIM component as glacier and fill
    the holes of the remaining component with OIM.

    :raises: ``ShapeError`` if the rock mask does not match the mask
    """

    classes = mask.classes.copy()

    if rock_mask is not None:
        if rock_mask.shape != mask.shape:
            raise ShapeError(
                f"rock mask of shape {rock_mask.shape} does not match {mask.shape}"
            )

        classes[rock_mask.classes == Zone.ROCK] = Zone.ROCK

    oim = classes == Zone.OIM
    keep = largest_component(oim)

    classes[oim & ~keep] = Zone.GLACIER
    classes[fill_holes(keep)] = Zone.OIM

    return mask.copy(classes)


def boundary_pixels(classes: np.ndarray) -> np.ndarray:
    """
    OIM pixels which have a glacier pixel among their edge neighbours.
    """

    glacier = np.pad(classes == Zone.GLACIER, 1)
    touches = (
        glacier[:-2, 1:-1] | glacier[2:, 1:-1] | glacier[1:-1, :-2] | glacier[1:-1, 2:]
    )
    return (classes == Zone.OIM) & touches


def _neighbours(pixel: Pixel, pixels: Set[Pixel]) -> List[Pixel]:
    row, col = pixel
    return [(row + dr, col + dc) for dr, dc in _STEPS if (row + dr, col + dc) in pixels]


def _walk(start: Pixel, pixels: Set[Pixel], visited: Set[Pixel]) -> List[Pixel]:
    path = [start]
    visited.add(start)
    current = start

    while True:
        candidates = [p for p in _neighbours(current, pixels) if p not in visited]

        if not candidates:
            return path

        current = candidates[0]
        visited.add(current)
        path.append(current)


def trace_components(boundary: np.ndarray) -> List[List[np.ndarray]]:
    """
    Trace a binary boundary map into polylines grouped by 8-connected front.
    Every group is walked greedily from its least connected pixel, preferring
    edge neighbours over corners. Pixels left over by the walk start branches
    which are joined to their already traced neighbour, so one front may be
    made of several polylines.

    :param boundary: Binary map of front pixels
    :type boundary: np.ndarray

    :return: Returns the ``(K, 2)`` arrays of ``(row, column)`` points per front
    :rtype: List[List[np.ndarray]]
    """

    labels, count = ndimage.label(boundary, structure=EIGHT_CONNECTED)
    components: List[List[np.ndarray]] = []

    for label in range(1, count + 1):
        rows, cols = np.nonzero(labels == label)
        ordered = list(zip(rows.tolist(), cols.tolist()))
        pixels = set(ordered)
        visited: Set[Pixel] = set()

        degrees = [len(_neighbours(pixel, pixels)) for pixel in ordered]
        start = ordered[int(np.argmin(degrees))]
        paths = [_walk(start, pixels, visited)]

        while len(visited) < len(pixels):
            for pixel in ordered:
                if pixel in visited:
                    continue

                anchors = [p for p in _neighbours(pixel, pixels) if p in visited]

                if anchors:
                    paths.append([anchors[0]] + _walk(pixel, pixels, visited))
                    break

        lines = [np.array(path, dtype=np.int64) for path in paths if len(path) >= 2]

        if lines:
            components.append(lines)

    return components


def extract_front(
    mask: ZoneMask,
    rock_mask: Optional[ZoneMask] = None,
    min_length_m: float = MIN_FRONT_LENGTH_M,
) -> FrontSet:
    """
    Extract the calving front polylines of a zone mask. An empty result means
    no front was found, which is a valid outcome. The length threshold applies
    to each connected front as a whole, branches included.

    Example usage:

    .. code-block:: python

        >>> import numpy as np
        >>> from gfkit.frontline import Zone, ZoneMask, extract_front
        >>>
        >>> classes = np.full((16, 16), Zone.GLACIER)
        >>> classes[8:] = Zone.OIM
        >>> front = extract_front(ZoneMask(classes, 100.0))
        >>> front.lengths_m()
        [1500.0]

    :param mask: Zone labels of the frame
    :type mask: ZoneMask

    :param rock_mask: Optional static rock mask whose rock pixels overwrite the mask
    :type rock_mask: Optional[ZoneMask]

    :param min_length_m: Fronts shorter than this are deleted
    :type min_length_m: float

    :return: Returns the fronts of the frame
    :rtype: FrontSet
    """

    cleaned = clean_mask(mask, rock_mask)
    components = trace_components(boundary_pixels(cleaned.classes))
    resolution = mask.resolution_m_per_px

    kept = [
        lines
        for lines in components
        if sum(polyline_length(line) for line in lines) * resolution >= min_length_m
    ]

    if len(kept) < len(components):
        logging.debug(
            "Deleted %d fronts shorter than %.0f m",
            len(components) - len(kept),
            min_length_m,
        )

    return FrontSet([line for lines in kept for line in lines], resolution)
