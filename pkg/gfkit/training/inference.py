"""
Whole-series prediction. Frames of any size are split into context-sized
tiles whose centered evaluation crops cover the frame; series longer than the
network's temporal window are processed in consecutive windows, the last one
aligned to the end of the series.
"""

import logging
from typing import List, Tuple

import numpy as np
from scipy.special import softmax

from gfkit.autodiff.tensor import Tensor, no_grad
from gfkit.frontline import ZoneMask
from gfkit.nn.network import Network, crop_for_eval
from gfkit.synth.dataset import SitsSample

DEFAULT_TILE_BATCH = 8


def time_windows(length: int, window: int) -> List[Tuple[int, int]]:
    """
    Consecutive ``(start, stop)`` windows covering ``length`` frames. The last
    window ends with the series and may overlap its predecessor.

    .. code-block:: python

        >>> time_windows(10, 4)
        [(0, 4), (4, 8), (6, 10)]
    """

    if length <= window:
        return [(0, length)]

    windows = [
        (start, start + window) for start in range(0, length - window + 1, window)
    ]

    if windows[-1][1] < length:
        windows.append((length - window, length))

    return windows


def tile_origins(size: int, step: int) -> List[int]:
    return list(range(0, size, step))


def predict_series(
    model: Network, sample: SitsSample, tile_batch: int = DEFAULT_TILE_BATCH
) -> np.ndarray:
    """
    Predict class probabilities for every frame of a series.

    :param model: The network
    :type model: Network

    :param sample: Series of any length and frame size
    :type sample: SitsSample

    :param tile_batch: Number of tiles forwarded at once
    :type tile_batch: int

    :return: Returns probabilities of shape ``(T, num_classes, H, W)``
    :rtype: np.ndarray
    """

    cfg = model.cfg
    images = sample.images()
    offsets = sample.day_offsets()
    length, height, width = images.shape

    context, crop = cfg.context, cfg.eval_crop
    margin = (context - crop) // 2
    padded_h = -(-height // crop) * crop
    padded_w = -(-width // crop) * crop

    padded = np.pad(
        images,
        (
            (0, 0),
            (margin, margin + padded_h - height),
            (margin, margin + padded_w - width),
        ),
        mode="symmetric",
    )
    origins = [
        (top, left)
        for top in tile_origins(padded_h, crop)
        for left in tile_origins(padded_w, crop)
    ]

    output = np.zeros((length, cfg.num_classes, padded_h, padded_w))
    done = np.zeros(length, dtype=bool)
    window = cfg.frames if cfg.temporal is not None else 1

    for start, stop in time_windows(length, window):
        fresh = ~done[start:stop]

        for first in range(0, len(origins), tile_batch):
            chunk = origins[first : first + tile_batch]
            tiles = np.stack(
                [
                    padded[start:stop, top : top + context, left : left + context]
                    for top, left in chunk
                ]
            )

            with no_grad():
                logits = model(Tensor(tiles[:, :, None]), dates=offsets[start:stop])

            probs = softmax(crop_for_eval(logits.numpy(), crop), axis=2)

            for (top, left), tile in zip(chunk, probs):
                rows, cols = slice(top, top + crop), slice(left, left + crop)
                output[start:stop][fresh, :, rows, cols] = tile[fresh]

        done[start:stop] = True

    logging.debug(
        'Predicted %d frames of "%s" with %d tiles per frame',
        length,
        sample.glacier_id,
        len(origins),
    )
    return output[:, :, :height, :width]


def to_masks(probabilities: np.ndarray, resolution_m_per_px: float) -> List[ZoneMask]:
    """
    Turn ``(T, K, H, W)`` probabilities or log-probabilities into zone masks.
    """

    return [
        ZoneMask(np.argmax(frame, axis=0).astype(np.uint8), resolution_m_per_px)
        for frame in probabilities
    ]
