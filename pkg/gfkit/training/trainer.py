"""
The training loop. Batches are produced by a background thread into a
bounded queue while the main thread runs the updates; after every epoch the
network is validated on whole series and the checkpoint with the lowest
validation MDE is kept.

A run directory holds:

* ``config.json``: the model and training configuration of the run
* ``curves.csv``: one row per epoch
* ``best.ckpt`` and ``final.ckpt``: parameter checkpoints
"""

import csv
from dataclasses import dataclass, field
import logging
import math
from pathlib import Path
import queue
import threading
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, validator  # pylint: disable=no-name-in-module

from gfkit.autodiff.checkpoint import save_checkpoint
from gfkit.autodiff.tensor import Tensor, backward
from gfkit.exceptions import AbortRunError, ConfigurationError, MissingFrontError
from gfkit.frontline import MIN_FRONT_LENGTH_M, extract_front
from gfkit.metrics import ConfusionCounts, mde
from gfkit.nn.network import ModelConfig, Network
from gfkit.synth.dataset import SitsSample
from gfkit.training.augment import AugmentConfig, augment
from gfkit.training.inference import predict_series, to_masks
from gfkit.training.losses import segmentation_loss
from gfkit.training.optim import SGD, ReduceLROnPlateau

CONFIG_NAME = "config.json"
CURVES_NAME = "curves.csv"
BEST_CHECKPOINT = "best.ckpt"
FINAL_CHECKPOINT = "final.ckpt"
CURVE_FIELDS = ["epoch", "train_loss", "val_mde_m", "val_miou", "lr"]


class TrainConfig(BaseModel):
    """
    Optimization settings of one run. The defaults follow the full-size
    schedule; :func:`TrainConfig.desk` shrinks it for a single machine.
    """

    lr: float = 0.01
    momentum: float = 0.0
    weight_decay: float = 0.0
    plateau_factor: float = 0.66
    plateau_patience: int = 10
    epochs: int = 80
    series_per_epoch: int = 5000
    batch_series: int = 32
    label_smoothing: float = 0.1
    dice_smoothing: float = 1.0
    frames: Optional[int] = None
    augment: AugmentConfig = AugmentConfig()
    min_front_length_m: float = MIN_FRONT_LENGTH_M
    queue_size: int = 4
    seed: int = 0

    @classmethod
    def desk(cls, **overrides) -> "TrainConfig":
        values = dict(epochs=12, series_per_epoch=96, batch_series=4)
        values.update(overrides)
        return cls(**values)

    @validator("lr")
    def check_lr(cls, value):  # pylint: disable=no-self-argument
        if value <= 0:
            raise ValueError("learning rate must be positive")

        return value

    @validator("epochs", "series_per_epoch", "batch_series", "queue_size")
    def check_positive(cls, value):  # pylint: disable=no-self-argument
        if value < 1:
            raise ValueError("must be a positive integer")

        return value

    @validator("label_smoothing")
    def check_smoothing(cls, value):  # pylint: disable=no-self-argument
        if not 0.0 <= value <= 1.0:
            raise ValueError("must be within [0, 1]")

        return value

    @validator("plateau_factor")
    def check_factor(cls, value):  # pylint: disable=no-self-argument
        if not 0.0 < value < 1.0:
            raise ValueError("must be within (0, 1)")

        return value

    @property
    def batches_per_epoch(self) -> int:
        return -(-self.series_per_epoch // self.batch_series)


class RunConfig(BaseModel):
    model: ModelConfig
    train: TrainConfig


@dataclass
class CurveRow:
    epoch: int
    train_loss: float
    val_mde_m: float
    val_miou: float
    lr: float


@dataclass
class RunResult:
    run_dir: Path
    best_epoch: int
    best_mde_m: float
    curves: List[CurveRow] = field(default_factory=list)
    checkpoints: Dict[str, Path] = field(default_factory=dict)


@dataclass
class Batch:
    images: np.ndarray
    labels: np.ndarray
    dates: np.ndarray


def fit_context(array: np.ndarray, context: int) -> np.ndarray:
    """
    Symmetrically pad the last two axes up to ``context`` if needed.
    """

    pad_h = max(0, context - array.shape[-2])
    pad_w = max(0, context - array.shape[-1])

    if not pad_h and not pad_w:
        return array

    widths = [(0, 0)] * (array.ndim - 2) + [(0, pad_h), (0, pad_w)]
    return np.pad(array, widths, mode="symmetric")


def draw_window(
    sample: SitsSample, frames: int, context: int, rng: np.random.Generator
) -> SitsSample:
    """
    Random window of ``frames`` consecutive frames and a random spatial crop
    of side ``context``.
    """

    start = int(rng.integers(0, len(sample) - frames + 1))
    window = sample.window(start, frames)

    images = fit_context(window.images(), context)
    labels = fit_context(window.labels(), context)
    top = int(rng.integers(0, images.shape[1] - context + 1))
    left = int(rng.integers(0, images.shape[2] - context + 1))
    region = (slice(None), slice(top, top + context), slice(left, left + context))

    return window.with_arrays(
        images[region], labels[region], window.resolution_m_per_px
    )


def produce_batches(
    train_set: Sequence[SitsSample],
    cfg: TrainConfig,
    frames: int,
    context: int,
    rng: np.random.Generator,
) -> Iterator[Batch]:
    """
    Yield the augmented batches of every epoch in training order.
    """

    for _ in range(cfg.epochs):
        for _ in range(cfg.batches_per_epoch):
            images, labels, dates = [], [], []

            for _ in range(cfg.batch_series):
                sample = draw_window(
                    train_set[int(rng.integers(len(train_set)))], frames, context, rng
                )
                donor = draw_window(
                    train_set[int(rng.integers(len(train_set)))], frames, context, rng
                )
                augmented = augment(sample, cfg.augment, rng, donor=donor)

                images.append(augmented.images())
                labels.append(augmented.labels())
                dates.append(augmented.day_offsets())

            yield Batch(
                np.stack(images)[:, :, None], np.stack(labels), np.stack(dates)
            )


class BatchProducer(threading.Thread):
    """
    Background thread filling a bounded queue with batches. Errors raised
    while producing are handed to the consumer.
    """

    _DONE = object()

    def __init__(self, batches: Iterator[Batch], size: int) -> None:
        super().__init__(daemon=True)
        self.batches = batches
        self.queue: "queue.Queue" = queue.Queue(maxsize=size)
        self.stopped = threading.Event()

    def run(self) -> None:
        try:
            for batch in self.batches:
                if self.stopped.is_set():
                    return

                self.queue.put(batch)
        except Exception as exc:  # pylint: disable=broad-except
            self.queue.put(exc)
            return

        self.queue.put(self._DONE)

    def __iter__(self) -> Iterator[Batch]:
        while True:
            item = self.queue.get()

            if item is self._DONE:
                return

            if isinstance(item, Exception):
                raise item

            yield item

    def stop(self) -> None:
        self.stopped.set()

        # Unblock a producer waiting on a full queue
        while not self.queue.empty():
            self.queue.get_nowait()


def validate(
    model: Network, val_set: Sequence[SitsSample], min_length_m: float
) -> Tuple[float, float]:
    """
    Validation MDE used for checkpoint selection and pooled mIoU. Frames
    without a predicted front are charged the image diagonal in meters.

    :return: Returns the penalized MDE in meters and the mIoU
    :rtype: Tuple[float, float]
    """

    counts = ConfusionCounts.empty()
    distances: List[float] = []

    for sample in val_set:
        predicted = to_masks(predict_series(model, sample), sample.resolution_m_per_px)
        height, width = sample.shape
        penalty = math.hypot(height, width) * sample.resolution_m_per_px

        for frame, pred in zip(sample.frames, predicted):
            counts = counts + ConfusionCounts.from_masks(frame.mask, pred)
            gt_fronts = extract_front(frame.mask, min_length_m=min_length_m)

            try:
                distances.append(
                    mde(gt_fronts, extract_front(pred, min_length_m=min_length_m))
                )
            except MissingFrontError as exc:
                if not exc.ground_truth_empty:
                    distances.append(penalty)

    score = float(np.mean(distances)) if distances else math.inf
    return score, float(np.mean(counts.iou()))


def write_curves(path: Path, curves: Sequence[CurveRow]) -> None:
    with path.open("w", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(CURVE_FIELDS)

        for row in curves:
            writer.writerow(
                [
                    row.epoch,
                    repr(row.train_loss),
                    repr(row.val_mde_m),
                    repr(row.val_miou),
                    repr(row.lr),
                ]
            )


def train(
    model: Network,
    train_set: Sequence[SitsSample],
    val_set: Sequence[SitsSample],
    cfg: TrainConfig,
    run_dir: Union[str, Path],
) -> RunResult:
    """
    Train the network and keep the checkpoint with the lowest validation
    MDE. The run is deterministic given the initial weights and ``cfg.seed``.

    :param model: Network to train, updated in place
    :type model: Network

    :param train_set: Training series with at least ``T`` frames each
    :type train_set: Sequence[SitsSample]

    :param val_set: Validation series
    :type val_set: Sequence[SitsSample]

    :param cfg: Optimization settings
    :type cfg: TrainConfig

    :param run_dir: Directory receiving the run artifacts
    :type run_dir: Union[str, Path]

    :return: Returns the curves and checkpoints of the run
    :rtype: RunResult

    :raises: ``AbortRunError`` if the loss diverges
    :raises: ``ConfigurationError`` if the data does not fit the configuration
    """

    frames = model.cfg.frames

    if cfg.frames is not None and cfg.frames != frames:
        raise ConfigurationError(
            f"training takes T={cfg.frames} but the network was built for T={frames}"
        )

    if not train_set or not val_set:
        raise ConfigurationError("training and validation sets must not be empty")

    short = [sample.glacier_id for sample in train_set if len(sample) < frames]

    if short:
        raise ConfigurationError(f"training series shorter than T={frames}: {short}")

    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / CONFIG_NAME).write_text(
        RunConfig(model=model.cfg, train=cfg).json(indent=2)
    )

    rng = np.random.default_rng(cfg.seed)
    optimizer = SGD(model.parameters(), cfg.lr, cfg.momentum, cfg.weight_decay)
    scheduler = ReduceLROnPlateau(optimizer, cfg.plateau_factor, cfg.plateau_patience)

    producer = BatchProducer(
        produce_batches(train_set, cfg, frames, model.cfg.context, rng), cfg.queue_size
    )
    producer.start()

    result = RunResult(run_dir=run_dir, best_epoch=0, best_mde_m=math.inf)
    batches = iter(producer)

    logging.info(
        'Training %d epochs of %d batches into "%s"',
        cfg.epochs,
        cfg.batches_per_epoch,
        run_dir,
    )

    try:
        for epoch in range(1, cfg.epochs + 1):
            losses: List[float] = []
            lr = optimizer.lr

            for index in range(cfg.batches_per_epoch):
                batch = next(batches)

                optimizer.zero_grad()
                logits = model(Tensor(batch.images), dates=batch.dates)
                loss = segmentation_loss(
                    logits, batch.labels, cfg.label_smoothing, cfg.dice_smoothing
                )

                if not np.isfinite(loss.item()):
                    logging.error("Loss diverged at epoch %d batch %d", epoch, index)
                    raise AbortRunError(
                        f"non-finite loss {loss.item()} at epoch {epoch}, "
                        f"batch {index}, learning rate {lr}"
                    )

                backward(loss)
                optimizer.step()
                losses.append(loss.item())
                logging.debug("Epoch %d batch %d loss %.6f", epoch, index, losses[-1])

            val_mde, val_miou = validate(model, val_set, cfg.min_front_length_m)
            scheduler.step(val_mde)

            row = CurveRow(epoch, float(np.mean(losses)), val_mde, val_miou, lr)
            result.curves.append(row)
            write_curves(run_dir / CURVES_NAME, result.curves)

            if val_mde < result.best_mde_m or not result.checkpoints:
                result.best_epoch, result.best_mde_m = epoch, val_mde
                result.checkpoints["best"] = run_dir / BEST_CHECKPOINT
                save_checkpoint(result.checkpoints["best"], model.state_dict())

            logging.info(
                "Epoch %d: loss %.4f, validation MDE %.1f m, mIoU %.4f, lr %g",
                epoch,
                row.train_loss,
                val_mde,
                val_miou,
                lr,
            )
    finally:
        producer.stop()

    result.checkpoints["final"] = run_dir / FINAL_CHECKPOINT
    save_checkpoint(result.checkpoints["final"], model.state_dict())

    logging.info(
        "Best validation MDE %.1f m at epoch %d", result.best_mde_m, result.best_epoch
    )
    return result
