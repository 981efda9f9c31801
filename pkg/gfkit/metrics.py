"""
Benchmark metrics: intersection over union of the zone labels, the mean
distance error (MDE) between calving fronts and the number of frames without
a detected front.
"""

from dataclasses import dataclass
import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel  # pylint: disable=no-name-in-module
from scipy.spatial.distance import cdist

from gfkit.exceptions import MissingFrontError, ShapeError
from gfkit.frontline import (
    MIN_FRONT_LENGTH_M,
    NUM_ZONES,
    FrontSet,
    Zone,
    ZoneMask,
    extract_front,
)

ZONE_NAMES = {zone: zone.name.lower() for zone in Zone}


@dataclass
class ConfusionCounts:
    """
    Per-class true positive, false positive and false negative pixel counts.
    """

    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray

    @classmethod
    def empty(cls, num_classes: int = NUM_ZONES) -> "ConfusionCounts":
        zeros = np.zeros(num_classes, dtype=np.int64)
        return cls(zeros.copy(), zeros.copy(), zeros.copy())

    @classmethod
    def from_masks(
        cls, gt: ZoneMask, pred: ZoneMask, num_classes: int = NUM_ZONES
    ) -> "ConfusionCounts":
        if gt.shape != pred.shape:
            raise ShapeError(
                f"ground truth {gt.shape} and prediction {pred.shape} differ in size"
            )

        matrix = np.bincount(
            gt.classes.ravel().astype(np.int64) * num_classes
            + pred.classes.ravel().astype(np.int64),
            minlength=num_classes * num_classes,
        ).reshape(num_classes, num_classes)

        tp = np.diag(matrix).copy()
        return cls(tp, matrix.sum(axis=0) - tp, matrix.sum(axis=1) - tp)

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn
        )

    def iou(self) -> np.ndarray:
        """
        IoU of every class; classes absent from both maps score 1.
        """

        union = self.tp + self.fp + self.fn
        safe = np.where(union == 0, 1, union)
        return np.where(union == 0, 1.0, self.tp / safe)


def miou(
    gt: ZoneMask, pred: ZoneMask, classes: Optional[Iterable[int]] = None
) -> float:
    """
    Mean over the given classes of ``TP / (TP + FN + FP)``.

    Example usage:

    .. code-block:: python

        >>> from gfkit.frontline import ZoneMask
        >>> from gfkit.metrics import miou
        >>>
        >>> miou(ZoneMask([[0, 1], [2, 3]], 1.0), ZoneMask([[0, 1], [2, 2]], 1.0))
        0.625

    :param gt: Ground truth labels
    :type gt: ZoneMask

    :param pred: Predicted labels
    :type pred: ZoneMask

    :param classes: Evaluated classes, all zones if not set
    :type classes: Optional[Iterable[int]]

    :raises: ``ShapeError`` if the masks differ in size
    """

    selected = list(range(NUM_ZONES))

    if classes is not None:
        selected = [int(zone) for zone in classes]

    iou = ConfusionCounts.from_masks(gt, pred).iou()
    return float(np.mean(iou[selected]))


def mde(gt_fronts: FrontSet, pred_fronts: FrontSet) -> float:
    """
    Symmetric mean distance between the pooled points of the ground truth and
    the predicted fronts of one frame, in meters.

    :param gt_fronts: Ground truth fronts
    :type gt_fronts: FrontSet

    :param pred_fronts: Predicted fronts
    :type pred_fronts: FrontSet

    :return: Returns the mean distance error in meters
    :rtype: float

    :raises: ``MissingFrontError`` if either front set is empty
    """

    if gt_fronts.is_empty:
        raise MissingFrontError(
            "the ground truth holds no front", ground_truth_empty=True
        )

    if pred_fronts.is_empty:
        raise MissingFrontError("no front was predicted")

    gt_points = gt_fronts.points().astype(np.float64)
    pred_points = pred_fronts.points().astype(np.float64)
    distances = cdist(gt_points, pred_points)

    # fsum is order independent, which keeps the metric exactly symmetric
    nearest = np.concatenate([distances.min(axis=1), distances.min(axis=0)])
    total = math.fsum(nearest)
    return total / (len(gt_points) + len(pred_points)) * gt_fronts.resolution_m_per_px


class MetricsReport(BaseModel):
    """
    Dataset level metrics. ``mde_m`` is None if no frame had a detected front.
    """

    mde_m: Optional[float] = None
    mde_ma_m: Optional[float] = None
    empty_count: int = 0
    images_evaluated: int = 0
    iou_all: float = 1.0
    iou_na: float = 1.0
    iou_rock: float = 1.0
    iou_glacier: float = 1.0
    iou_oim: float = 1.0


EvaluationPair = Tuple[ZoneMask, ZoneMask, FrontSet]


def _mean_mde(
    gt_fronts: Sequence[FrontSet], pred_fronts: Sequence[FrontSet]
) -> Tuple[Optional[float], int, int]:
    distances: List[float] = []
    empty = 0

    for index, (gt, pred) in enumerate(zip(gt_fronts, pred_fronts)):
        try:
            distances.append(mde(gt, pred))
        except MissingFrontError as exc:
            empty += 1

            if exc.ground_truth_empty and not pred.is_empty:
                logging.warning(
                    "Frame %d has a predicted front but none in the ground truth",
                    index,
                )

    mean = float(np.mean(distances)) if distances else None
    return mean, empty, len(distances)


def dataset_report(
    pairs: Sequence[EvaluationPair],
    ma_fronts: Optional[Sequence[FrontSet]] = None,
    rock_mask: Optional[ZoneMask] = None,
    min_length_m: float = MIN_FRONT_LENGTH_M,
) -> MetricsReport:
    """
    Evaluate a dataset of frames. IoU is computed from confusion counts pooled
    over all frames. MDE is averaged over the frames with a detected front and
    the frames without one are counted in ``empty_count``.

    When ``ma_fronts`` is given, ``mde_ma_m`` is computed against these
    alternative ground truth fronts from predictions post-processed with the
    static ``rock_mask``.

    :param pairs: Ground truth mask, predicted mask and ground truth fronts per frame
    :type pairs: Sequence[Tuple[ZoneMask, ZoneMask, FrontSet]]

    :param ma_fronts: Alternative ground truth fronts, one per frame
    :type ma_fronts: Optional[Sequence[FrontSet]]

    :param rock_mask: Static rock mask applied for the alternative evaluation
    :type rock_mask: Optional[ZoneMask]

    :return: Returns the dataset metrics
    :rtype: MetricsReport
    """

    if not pairs:
        raise ShapeError("cannot evaluate an empty dataset")

    counts = ConfusionCounts.empty()
    pred_fronts: List[FrontSet] = []

    for gt_mask, pred_mask, _ in pairs:
        counts = counts + ConfusionCounts.from_masks(gt_mask, pred_mask)
        pred_fronts.append(extract_front(pred_mask, min_length_m=min_length_m))

    mde_m, empty, evaluated = _mean_mde([gt for _, _, gt in pairs], pred_fronts)
    mde_ma_m: Optional[float] = None

    if ma_fronts is not None:
        if len(ma_fronts) != len(pairs):
            raise ShapeError(
                f"{len(ma_fronts)} alternative fronts given for {len(pairs)} frames"
            )

        ma_pred = [
            extract_front(pred, rock_mask=rock_mask, min_length_m=min_length_m)
            for _, pred, _ in pairs
        ]
        mde_ma_m, _, _ = _mean_mde(ma_fronts, ma_pred)

    iou = counts.iou()
    per_class: Dict[str, float] = {
        f"iou_{ZONE_NAMES[zone]}": float(iou[zone]) for zone in Zone
    }

    report = MetricsReport(
        mde_m=mde_m,
        mde_ma_m=mde_ma_m,
        empty_count=empty,
        images_evaluated=evaluated,
        iou_all=float(np.mean(iou)),
        **per_class,
    )

    logging.info(
        "Evaluated %d frames: MDE %s m, empty %d, mIoU %.4f",
        len(pairs),
        "n/a" if mde_m is None else f"{mde_m:.1f}",
        empty,
        report.iou_all,
    )

    return report
