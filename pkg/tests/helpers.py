from datetime import date, timedelta
from typing import Optional

import numpy as np

from gfkit.frontline import Zone, ZoneMask
from gfkit.nn.network import ModelConfig
from gfkit.nn.temporal import TemporalConnConfig
from gfkit.synth.dataset import Frame, SitsSample
from gfkit.synth.scene import SceneParams

TINY_CONTEXT = 16
TINY_EVAL_CROP = 8


def tiny_model_config(kind: Optional[str] = None, frames: int = 3, **overrides):
    """Two stage network small enough to run a forward pass in a test."""

    values = dict(
        base_channels=8,
        channel_mult=[1, 2],
        depths=[1, 1],
        window_size=2,
        head_dim=4,
        context=TINY_CONTEXT,
        eval_crop=TINY_EVAL_CROP,
        temporal_stages={0, 1},
    )

    if kind is not None:
        values.update(temporal=TemporalConnConfig(kind=kind), frames=frames)

    values.update(overrides)
    return ModelConfig(**values)


def small_scene(**overrides) -> SceneParams:
    values = dict(
        side=32,
        na_band_px=2,
        wiggle_px=1.0,
        melange_extent_px=4,
        calving_prob=0.0,
    )
    values.update(overrides)
    return SceneParams(**values)


def front_mask(side: int = 16, front_row: int = 8, resolution: float = 100.0):
    """Glacier above ``front_row``, ocean from it on."""

    classes = np.full((side, side), Zone.GLACIER, dtype=np.uint8)
    classes[front_row:] = Zone.OIM
    return ZoneMask(classes, resolution)


def random_series(frames: int = 2, side: int = 12, seed: int = 0) -> SitsSample:
    """Noise frames over a straight front, a few days apart."""

    rng = np.random.default_rng(seed)
    return SitsSample(
        [
            Frame(
                rng.uniform(0.0, 1.0, size=(side, side)),
                front_mask(side, side // 2, 50.0),
                date(2020, 1, 1) + timedelta(days=6 * index),
            )
            for index in range(frames)
        ],
        50.0,
        f"noise-{seed}",
    )
