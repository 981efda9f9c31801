"""
Segmentation loss: label smoothed cross-entropy plus soft Dice.
"""

import numpy as np

from gfkit.autodiff import functional as F
from gfkit.autodiff.tensor import Tensor
from gfkit.exceptions import ShapeError

CLASS_AXIS = 2
DICE_SMOOTHING = 1.0


def one_hot(
    targets: np.ndarray, num_classes: int, axis: int = CLASS_AXIS
) -> np.ndarray:
    encoded = np.eye(num_classes, dtype=np.float64)[np.asarray(targets, dtype=np.int64)]
    return np.moveaxis(encoded, -1, axis)


def smoothed_targets(
    targets: np.ndarray, num_classes: int, epsilon: float, axis: int = CLASS_AXIS
) -> np.ndarray:
    """
    Target distributions with ``1 - epsilon + epsilon / K`` on the true class
    and ``epsilon / K`` on every other class.
    """

    return (1.0 - epsilon) * one_hot(targets, num_classes, axis) + epsilon / num_classes


def _check_shapes(logits: Tensor, targets: np.ndarray) -> None:
    expected = logits.shape[:CLASS_AXIS] + logits.shape[CLASS_AXIS + 1 :]

    if logits.ndim != 5 or targets.shape != expected:
        raise ShapeError(
            f"logits {logits.shape} and targets {targets.shape} do not align, "
            "expected (N, T, K, H, W) and (N, T, H, W)"
        )


def smoothed_cross_entropy(
    logits: Tensor, targets: np.ndarray, epsilon: float
) -> Tensor:
    _check_shapes(logits, targets)
    num_classes = logits.shape[CLASS_AXIS]
    weights = smoothed_targets(targets, num_classes, epsilon)

    log_probs = F.log_softmax(logits, axis=CLASS_AXIS)
    per_pixel = F.sum(F.mul(log_probs, Tensor(weights)), axis=CLASS_AXIS)
    return -F.mean(per_pixel)


def dice_loss(
    logits: Tensor, targets: np.ndarray, smoothing: float = DICE_SMOOTHING
) -> Tensor:
    """
    ``1 - mean_c (2 * sum(p_c * t_c) + s) / (sum(p_c) + sum(t_c) + s)`` over
    softmax probabilities ``p`` and one-hot targets ``t``.
    """

    _check_shapes(logits, targets)
    num_classes = logits.shape[CLASS_AXIS]
    hot = one_hot(targets, num_classes)
    reduce_axes = tuple(axis for axis in range(logits.ndim) if axis != CLASS_AXIS)

    probs = F.softmax(logits, axis=CLASS_AXIS)
    overlap = F.sum(F.mul(probs, Tensor(hot)), axis=reduce_axes)
    predicted = F.sum(probs, axis=reduce_axes)

    numerator = F.add(F.mul(overlap, 2.0), smoothing)
    denominator = F.add(predicted, Tensor(hot.sum(axis=reduce_axes) + smoothing))
    return F.sub(1.0, F.mean(F.div(numerator, denominator)))


def segmentation_loss(
    logits: Tensor,
    targets: np.ndarray,
    epsilon: float = 0.1,
    smoothing: float = DICE_SMOOTHING,
) -> Tensor:
    """
    Combined loss over the full context of every frame.

    :param logits: Logits of shape ``(N, T, K, H, W)``
    :type logits: Tensor

    :param targets: Zone labels of shape ``(N, T, H, W)``
    :type targets: np.ndarray

    :param epsilon: Label smoothing factor
    :type epsilon: float

    :param smoothing: Dice smoothing constant
    :type smoothing: float

    :return: Returns the scalar loss
    :rtype: Tensor

    :raises: ``ShapeError`` if the logits and targets do not align
    """

    targets = np.asarray(targets)
    return smoothed_cross_entropy(logits, targets, epsilon) + dice_loss(
        logits, targets, smoothing
    )
