"""
Procedural SAR-like glacier scenes.

A scene is a square grid holding a no-data band along the top edge, rock
margins on both sides of a fjord, a glacier tongue filling the fjord and open
ocean below. The calving front is the piecewise-linear lower edge of the
tongue; it moves between frames according to the trajectory parameters.

Masks depend only on the geometry stream of the seed; appearance confounders
(mélange, snow and speckle) draw from a separate stream and never alter them.
"""

from datetime import date, timedelta
import logging
from typing import List, Optional

import numpy as np
from pydantic import (  # pylint: disable=no-name-in-module
    BaseModel,
    root_validator,
    validator,
)
from scipy.ndimage import gaussian_filter

from gfkit.exceptions import ConfigurationError, GeometryError
from gfkit.frontline import Zone, ZoneMask
from gfkit.synth.dataset import Frame, SitsSample

BASE_DATE = date(2016, 1, 1)

# Independent random streams derived from one seed
GEOMETRY_STREAM = 0
APPEARANCE_STREAM = 1
SCHEDULE_STREAM = 2

FRONT_KNOT_SPACING = 8


class SceneParams(BaseModel):
    """
    Parameters of one synthetic series. Lengths given in meters are converted
    to pixels with ``resolution_m_per_px``.
    """

    side: int = 128
    resolution_m_per_px: float = 50.0

    # Trajectory: positive values retreat toward land
    retreat_m_per_frame: float = 100.0
    calving_prob: float = 0.1
    calving_m: float = 250.0

    melange_prob: float = 0.3
    melange_intensity: float = 0.8
    melange_extent_px: int = 24
    snow_prob: float = 0.3
    snow_intensity: float = 0.7
    speckle_looks: float = 4.0

    day_offsets: Optional[List[int]] = None
    min_gap_days: int = 6
    max_gap_days: int = 30
    seed: int = 0

    rock_mean: float = 0.45
    glacier_mean: float = 0.7
    ocean_mean: float = 0.2
    texture_std: float = 0.05
    texture_sigma: float = 1.5

    na_band_px: int = 6
    margin_fraction: float = 0.2
    coast_fraction: float = 0.75
    front_fraction: float = 0.6
    wiggle_px: float = 3.0
    wiggle_period_px: float = 40.0
    min_oim_share: float = 0.1

    @validator(
        "calving_prob",
        "melange_prob",
        "melange_intensity",
        "snow_prob",
        "snow_intensity",
        "rock_mean",
        "glacier_mean",
        "ocean_mean",
        "min_oim_share",
    )
    def check_unit_interval(cls, value):  # pylint: disable=no-self-argument
        if not 0.0 <= value <= 1.0:
            raise ValueError("must be within [0, 1]")

        return value

    @validator("margin_fraction", "coast_fraction", "front_fraction")
    def check_fraction(cls, value):  # pylint: disable=no-self-argument
        if not 0.0 < value < 1.0:
            raise ValueError("must be within (0, 1)")

        return value

    @validator(
        "side",
        "resolution_m_per_px",
        "speckle_looks",
        "min_gap_days",
        "wiggle_period_px",
        "texture_sigma",
    )
    def check_positive(cls, value):  # pylint: disable=no-self-argument
        if value <= 0:
            raise ValueError("must be positive")

        return value

    @validator(
        "na_band_px", "melange_extent_px", "calving_m", "texture_std", "wiggle_px"
    )
    def check_non_negative(cls, value):  # pylint: disable=no-self-argument
        if value < 0:
            raise ValueError("must not be negative")

        return value

    @root_validator(skip_on_failure=True)
    def check_schedule(cls, values):  # pylint: disable=no-self-argument
        if values["max_gap_days"] < values["min_gap_days"]:
            raise ValueError("max_gap_days must not be smaller than min_gap_days")

        offsets = values["day_offsets"]

        if offsets is not None and any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise ValueError("day offsets must be strictly increasing")

        if values["margin_fraction"] >= 0.5:
            raise ValueError("rock margins must leave room for the fjord")

        return values


def speckle(
    image: np.ndarray, looks: float, rng: Optional[np.random.Generator] = None
) -> np.ndarray:
    """
    Multiply the image by gamma distributed speckle of unit mean and variance
    ``1 / looks``.

    :param image: Intensity image
    :type image: np.ndarray

    :param looks: Number of looks, the shape of the gamma distribution
    :type looks: float

    :param rng: Random generator, a fresh unseeded one if not set
    :type rng: Optional[np.random.Generator]

    :return: Returns the speckled image
    :rtype: np.ndarray

    :raises: ``ConfigurationError`` if ``looks`` is not positive
    """

    if looks <= 0:
        raise ConfigurationError(f"speckle looks must be positive, got {looks}")

    rng = rng or np.random.default_rng()
    multiplier = rng.gamma(shape=looks, scale=1.0 / looks, size=np.shape(image))
    return np.asarray(image, dtype=np.float64) * multiplier


def _front_profile(params: SceneParams, rng: np.random.Generator) -> np.ndarray:
    """
    Front row offsets per column: a sinusoid sampled at knots and linearly
    interpolated in between.
    """

    columns = np.arange(params.side)
    knots = np.arange(0, params.side + FRONT_KNOT_SPACING, FRONT_KNOT_SPACING)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    angles = 2.0 * np.pi * knots / params.wiggle_period_px + phase
    values = params.wiggle_px * np.sin(angles)
    return np.interp(columns, knots, values)


def _front_shifts(
    params: SceneParams, frames: int, rng: np.random.Generator
) -> List[int]:
    """
    Cumulative retreat of the front in whole pixels, per frame.
    """

    shifts = []
    retreat_m = 0.0

    for index in range(frames):
        if index:
            retreat_m += params.retreat_m_per_frame

            if rng.random() < params.calving_prob:
                retreat_m += params.calving_m

        shifts.append(int(round(retreat_m / params.resolution_m_per_px)))

    return shifts


def scene_mask(params: SceneParams, front_rows: np.ndarray) -> np.ndarray:
    """
    Rasterize the zones of one frame given the front row of every column.

    :raises: ``GeometryError`` if the front leaves the image
    """

    side = params.side
    margin = max(1, int(round(params.margin_fraction * side)))
    coast = int(round(params.coast_fraction * side))

    if front_rows.min() <= params.na_band_px or front_rows.max() >= side - 1:
        raise GeometryError(
            f"front rows span {front_rows.min()}..{front_rows.max()}, "
            f"outside the image rows {params.na_band_px + 1}..{side - 2}"
        )

    rows = np.arange(side)[:, None]
    columns = np.arange(side)[None, :]
    fjord = (columns >= margin) & (columns < side - margin)

    classes = np.full((side, side), Zone.OIM, dtype=np.uint8)
    classes[(rows < coast) & ~fjord] = Zone.ROCK
    classes[fjord & (rows < front_rows[None, :])] = Zone.GLACIER
    classes[: params.na_band_px] = Zone.NA

    share = float(np.mean(classes == Zone.OIM))

    if share < params.min_oim_share:
        raise GeometryError(
            f"OIM covers {share:.1%} of the image, less than {params.min_oim_share:.1%}"
        )

    return classes


def _texture(params: SceneParams, rng: np.random.Generator) -> np.ndarray:
    field = gaussian_filter(
        rng.standard_normal((params.side, params.side)), params.texture_sigma
    )
    spread = max(float(field.std()), np.finfo(np.float64).tiny)
    return field / spread * params.texture_std


def _zero_mean(field: np.ndarray, region: np.ndarray) -> np.ndarray:
    if region.any():
        field = field.copy()
        field[region] -= field[region].mean()

    return field


def render_frame(
    params: SceneParams,
    classes: np.ndarray,
    front_rows: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Render the intensity image of one frame. Each zone gets its mean plus a
    smooth zero-mean texture; mélange and snow are drawn per frame and speckle
    is applied last.
    """

    means = {
        Zone.NA: 0.0,
        Zone.ROCK: params.rock_mean,
        Zone.GLACIER: params.glacier_mean,
        Zone.OIM: params.ocean_mean,
    }
    image = np.zeros(classes.shape, dtype=np.float64)
    texture = _texture(params, rng)

    for zone, mean in means.items():
        region = classes == zone

        if zone != Zone.NA:
            image[region] = mean + _zero_mean(texture, region)[region]

    rows = np.arange(params.side)[:, None]

    if rng.random() < params.melange_prob:
        near_front = (classes == Zone.OIM) & (
            rows < front_rows[None, :] + params.melange_extent_px
        )
        ice = params.glacier_mean + _texture(params, rng)
        blend = params.melange_intensity
        image[near_front] = (1.0 - blend) * image[near_front] + blend * ice[near_front]
        logging.debug("Mélange over %d pixels", int(near_front.sum()))

    if rng.random() < params.snow_prob:
        rock = classes == Zone.ROCK
        snow = params.glacier_mean + _texture(params, rng)
        blend = params.snow_intensity
        image[rock] = (1.0 - blend) * image[rock] + blend * snow[rock]
        logging.debug("Snow over %d pixels", int(rock.sum()))

    image = np.clip(image, 0.0, None)
    return np.clip(speckle(image, params.speckle_looks, rng), 0.0, 1.0)


def _schedule(params: SceneParams, frames: int) -> List[date]:
    if params.day_offsets is not None:
        if len(params.day_offsets) < frames:
            raise ConfigurationError(
                f"{len(params.day_offsets)} day offsets given for {frames} frames"
            )

        offsets = list(params.day_offsets[:frames])
    else:
        rng = np.random.default_rng([params.seed, SCHEDULE_STREAM])
        gaps = rng.integers(params.min_gap_days, params.max_gap_days + 1, size=frames)
        offsets = np.concatenate([[0], np.cumsum(gaps[1:])]).tolist()

    return [BASE_DATE + timedelta(days=int(offset)) for offset in offsets]


def generate(
    params: SceneParams, frames: int, glacier_id: Optional[str] = None
) -> SitsSample:
    """
    Generate a series of ``frames`` co-registered frames. The result only
    depends on ``params``, including its seed.

    Example usage:

    .. code-block:: python

        >>> from gfkit.synth import SceneParams, generate
        >>>
        >>> sample = generate(SceneParams(seed=3), frames=4)
        >>> len(sample), sample.shape
        (4, (128, 128))

    :param params: Scene parameters
    :type params: SceneParams

    :param frames: Number of frames
    :type frames: int

    :param glacier_id: Identifier stored with the series
    :type glacier_id: Optional[str]

    :return: Returns the generated series
    :rtype: SitsSample

    :raises: ``GeometryError`` if the front leaves the image at any frame
    """

    if frames < 1:
        raise ConfigurationError(f"a series needs at least one frame, got {frames}")

    geometry = np.random.default_rng([params.seed, GEOMETRY_STREAM])
    appearance = np.random.default_rng([params.seed, APPEARANCE_STREAM])

    profile = _front_profile(params, geometry)
    start = int(round(params.front_fraction * params.side))
    base_rows = start + np.round(profile).astype(np.int64)
    dates = _schedule(params, frames)

    result = []

    for shift, when in zip(_front_shifts(params, frames, geometry), dates):
        front_rows = base_rows - shift
        classes = scene_mask(params, front_rows)
        image = render_frame(params, classes, front_rows, appearance)
        result.append(Frame(image, ZoneMask(classes, params.resolution_m_per_px), when))

    return SitsSample(
        result, params.resolution_m_per_px, glacier_id or f"synthetic-{params.seed}"
    )


def vary(params: SceneParams, rng: np.random.Generator) -> SceneParams:
    """
    Draw the parameters of one series of a dataset around ``params``.
    """

    return params.copy(
        update=dict(
            seed=int(rng.integers(0, 2**31 - 1)),
            retreat_m_per_frame=params.retreat_m_per_frame * rng.uniform(-0.5, 1.5),
            front_fraction=float(
                np.clip(params.front_fraction + rng.uniform(-0.1, 0.1), 0.3, 0.8)
            ),
        )
    )


def generate_dataset(
    params: SceneParams,
    series: int,
    frames: int,
    seed: int = 0,
    max_attempts: int = 50,
) -> List[SitsSample]:
    """
    Generate ``series`` series of ``frames`` frames with per-series variation
    of the trajectory. Draws with degenerate geometry are replaced by new ones.

    :raises: ``GeometryError`` if no valid series is found for a slot
    """

    rng = np.random.default_rng(seed)
    samples: List[SitsSample] = []

    for index in range(series):
        for _ in range(max_attempts):
            candidate = vary(params, rng)

            try:
                samples.append(generate(candidate, frames, f"synthetic-{index:04d}"))
                break
            except GeometryError as exc:
                logging.debug("Redrawing series %d: %s", index, exc)
        else:
            raise GeometryError(
                f"no valid geometry found for series {index} "
                f"after {max_attempts} attempts"
            )

    logging.info("Generated %d series of %d frames", series, frames)
    return samples
