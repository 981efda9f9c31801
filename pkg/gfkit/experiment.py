"""
Repeated training runs of one or more network variants, their ensemble and
the resulting report.

An experiment directory holds one run directory per variant and run
(``<variant>/run_<k>``), ``experiment.json`` with the configuration and the
``report.csv`` / ``report.json`` reports on the test split.
The ``mde_ma_m`` column stays blank because no alternative ground truth fronts
are available for the test split.
"""

from concurrent.futures import ThreadPoolExecutor
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import (  # pylint: disable=no-name-in-module
    BaseModel,
    root_validator,
    validator,
)

from gfkit.autodiff.checkpoint import load_checkpoint
from gfkit.exceptions import ConfigurationError
from gfkit.frontline import MIN_FRONT_LENGTH_M, FrontSet, ZoneMask, extract_front
from gfkit.metrics import MetricsReport, dataset_report
from gfkit.nn.network import ModelConfig, Network
from gfkit.nn.temporal import TemporalConnConfig, TemporalKind
from gfkit.reporters.base import ReportRow
from gfkit.reporters.csv import CsvReporter
from gfkit.reporters.json import JsonReporter
from gfkit.synth.dataset import SitsSample, read_dataset
from gfkit.synth.scene import SceneParams, generate_dataset
from gfkit.training.ensemble import EnsembleMethod, combine
from gfkit.training.inference import predict_series, to_masks
from gfkit.training.trainer import RunResult, TrainConfig, train

try:
    import ujson as json
except ImportError:  # pragma: no cover
    import json  # type: ignore

SPLITS = ("train", "val", "test")
NO_TEMPORAL = "none"
ENSEMBLE_RUN = "ensemble"
EXPERIMENT_CONFIG_NAME = "experiment.json"
REPORT_CSV = "report.csv"
REPORT_JSON = "report.json"


class DataConfig(BaseModel):
    """
    Where the series come from: a dataset directory with ``train``, ``val``
    and ``test`` subdirectories, or the synthetic generator.
    """

    path: Optional[Path] = None
    scene: SceneParams = SceneParams()
    train_series: int = 30
    val_series: int = 8
    test_series: int = 8
    frames: int = 8
    seed: int = 0

    @validator("train_series", "val_series", "test_series", "frames")
    def check_positive(cls, value):  # pylint: disable=no-self-argument
        if value < 1:
            raise ValueError("must be a positive integer")

        return value

    @validator("path")
    def check_path(cls, value):  # pylint: disable=no-self-argument
        if value is None:
            return value

        missing = [split for split in SPLITS if not (value / split).is_dir()]

        if missing:
            raise ValueError(f'"{value}" lacks the split directories {missing}')

        return value


class ExperimentConfig(BaseModel):
    """
    Configuration of an experiment. ``variants`` lists temporal kinds
    (``none``, ``conv``, ``ltae``, ``gru``) trained with otherwise identical
    settings; if empty, ``model`` is used as given.
    """

    name: str = "experiment"
    model: ModelConfig = ModelConfig.desk()
    train: TrainConfig = TrainConfig.desk()
    data: DataConfig = DataConfig()
    variants: List[str] = []
    runs: int = 5
    ensemble_method: EnsembleMethod = EnsembleMethod.MEAN
    min_front_length_m: float = MIN_FRONT_LENGTH_M
    output_dir: Path = Path("experiment")

    @validator("runs")
    def check_runs(cls, value):  # pylint: disable=no-self-argument
        if value < 1:
            raise ValueError("at least one run is needed")

        return value

    @validator("variants", each_item=True)
    def check_variant(cls, value):  # pylint: disable=no-self-argument
        allowed = [NO_TEMPORAL] + [kind.value for kind in TemporalKind]

        if value not in allowed:
            raise ValueError(f"variant must be one of {', '.join(allowed)}")

        return value

    @root_validator(skip_on_failure=True)
    def check_frames(cls, values):  # pylint: disable=no-self-argument
        frames = values["model"].frames

        if values["data"].path is None and values["data"].frames < frames:
            raise ValueError(
                f"synthetic series of {values['data'].frames} frames are shorter "
                f"than the temporal window T={frames}"
            )

        return values

    def variant_configs(self) -> Dict[str, ModelConfig]:
        """
        Model configuration of every variant, keyed by its report name.
        """

        if not self.variants:
            temporal = self.model.temporal
            name = temporal.kind.value if temporal else NO_TEMPORAL
            return {name: self.model}

        template = self.model.temporal or TemporalConnConfig(kind=TemporalKind.CONV)
        frames = self.model.frames if self.model.temporal else self.data.frames
        configs: Dict[str, ModelConfig] = dict()

        for variant in self.variants:
            if variant == NO_TEMPORAL:
                configs[variant] = self.model.without_temporal()
            else:
                configs[variant] = self.model.copy(
                    update={
                        "temporal": template.copy(
                            update={"kind": TemporalKind(variant)}
                        ),
                        "frames": frames,
                    }
                )

        return configs


def load_experiment_config(
    path: Optional[Path] = None,
    output_dir: Optional[Path] = None,
    seed: Optional[int] = None,
    temporal: Optional[str] = None,
    frames: Optional[int] = None,
    runs: Optional[int] = None,
    variants: Optional[List[str]] = None,
) -> ExperimentConfig:
    """
    Read an experiment configuration from Json and apply the command line
    overrides before validation. A missing model section means the reduced
    network.

    :raises: ``ConfigurationError`` if the file does not exist
    :raises: ``ValidationError`` if the result violates an invariant
    """

    values: Dict[str, Any] = dict()

    if path is not None:
        if not Path(path).is_file():
            raise ConfigurationError(f'Configuration file "{path}" does not exist')

        values = json.loads(Path(path).read_text())

    model = values.setdefault("model", ModelConfig.desk().dict())
    train_values = values.setdefault("train", TrainConfig.desk().dict())
    data = values.setdefault("data", dict())

    if temporal == NO_TEMPORAL:
        model.update(temporal=None, frames=1)
    elif temporal is not None:
        model["temporal"] = {**(model.get("temporal") or dict()), "kind": temporal}

        if frames is None and model.get("frames", 1) == 1:
            model["frames"] = data.get("frames", DataConfig().frames)

    if frames is not None:
        model["frames"] = frames

    if seed is not None:
        train_values["seed"] = seed
        data["seed"] = seed

    if runs is not None:
        values["runs"] = runs

    if variants is not None:
        values["variants"] = variants

    if output_dir is not None:
        values["output_dir"] = str(output_dir)

    return ExperimentConfig.parse_obj(values)


Splits = Dict[str, List[SitsSample]]


def load_splits(data: DataConfig) -> Splits:
    """
    Read the splits from disk or generate them with independent seeds.
    """

    if data.path is not None:
        return {split: read_dataset(data.path / split) for split in SPLITS}

    counts = {
        "train": data.train_series,
        "val": data.val_series,
        "test": data.test_series,
    }
    seeds = np.random.SeedSequence(data.seed).generate_state(len(SPLITS))

    return {
        split: generate_dataset(data.scene, counts[split], data.frames, seed=int(seed))
        for split, seed in zip(SPLITS, seeds)
    }


def evaluate(
    samples: Sequence[SitsSample],
    probabilities: Sequence[np.ndarray],
    min_length_m: float = MIN_FRONT_LENGTH_M,
    ma_fronts: Optional[Sequence[FrontSet]] = None,
    rock_mask: Optional[ZoneMask] = None,
) -> MetricsReport:
    """
    Metrics of per-series predictions against the masks of the series.

    ``mde_ma_m`` needs alternative ground truth fronts, one per frame in
    series order, and is None without them. Neither the synthetic generator
    nor the dataset layout provides such fronts, so experiment reports leave
    the column blank.
    """

    pairs: List[Tuple[ZoneMask, ZoneMask, FrontSet]] = []

    for sample, predicted in zip(samples, probabilities):
        masks = to_masks(predicted, sample.resolution_m_per_px)

        for frame, mask in zip(sample.frames, masks):
            pairs.append(
                (frame.mask, mask, extract_front(frame.mask, min_length_m=min_length_m))
            )

    return dataset_report(
        pairs, ma_fronts=ma_fronts, rock_mask=rock_mask, min_length_m=min_length_m
    )


def _run(
    cfg: ExperimentConfig,
    model_cfg: ModelConfig,
    run_dir: Path,
    index: int,
    splits: Splits,
) -> Tuple[Network, RunResult]:
    seed = cfg.train.seed + index
    model = Network(model_cfg, np.random.default_rng([seed, 1]))
    train_cfg = cfg.train.copy(update={"seed": seed, "frames": model_cfg.frames})

    result = train(model, splits["train"], splits["val"], train_cfg, run_dir)
    model.load_state_dict(load_checkpoint(result.checkpoints["best"]))
    return model, result


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> List[ReportRow]:
    """
    Train ``cfg.runs`` networks per variant, evaluate each on the test split
    with its best checkpoint, evaluate the ensemble of the runs and write the
    reports.

    :param cfg: Experiment configuration
    :type cfg: ExperimentConfig

    :param workers: Number of runs trained concurrently
    :type workers: int

    :return: Returns the report rows, one per variant and run plus the ensembles
    :rtype: List[ReportRow]
    """

    if workers < 1:
        raise ConfigurationError(f"at least one worker is needed, got {workers}")

    output_dir = Path(cfg.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    (output_dir / EXPERIMENT_CONFIG_NAME).write_text(cfg.json(indent=2))

    splits = load_splits(cfg.data)
    rows: List[ReportRow] = []

    logging.info(
        'Experiment "%s": %d runs of %s',
        cfg.name,
        cfg.runs,
        ", ".join(cfg.variant_configs()),
    )

    for variant, model_cfg in cfg.variant_configs().items():
        run_dirs = [output_dir / variant / f"run_{index}" for index in range(cfg.runs)]

        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = [
                executor.submit(_run, cfg, model_cfg, run_dir, index, splits)
                for index, run_dir in enumerate(run_dirs)
            ]
            models = [future.result()[0] for future in futures]

        member_probabilities: List[List[np.ndarray]] = []

        for index, model in enumerate(models):
            predicted = [predict_series(model, sample) for sample in splits["test"]]
            member_probabilities.append(predicted)
            report = evaluate(splits["test"], predicted, cfg.min_front_length_m)
            rows.append(ReportRow(model=variant, run=str(index), **report.dict()))

        if cfg.runs > 1:
            combined = [
                combine(
                    [member[position] for member in member_probabilities],
                    cfg.ensemble_method,
                )
                for position in range(len(splits["test"]))
            ]
            report = evaluate(splits["test"], combined, cfg.min_front_length_m)
            rows.append(ReportRow(model=variant, run=ENSEMBLE_RUN, **report.dict()))

    CsvReporter(rows, output_dir / REPORT_CSV).report()
    JsonReporter(rows, output_dir / REPORT_JSON).report()

    return rows
