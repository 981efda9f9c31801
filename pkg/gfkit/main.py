from enum import Enum
import logging
from pathlib import Path
import sys
from typing import List, Optional

import click
import numpy as np
from PIL import Image
from pydantic import ValidationError  # pylint: disable=no-name-in-module
import typer

from gfkit import __version__
from gfkit.config import DEFAULT_PROJECT_CONFIG, config
from gfkit.exceptions import ConfigurationError, GeometryError
from gfkit.experiment import (
    ExperimentConfig,
    load_experiment_config,
    load_splits,
    run_experiment,
)
from gfkit.frontline import MIN_FRONT_LENGTH_M, FrontSet, ZoneMask, extract_front
from gfkit.metrics import dataset_report
from gfkit.nn.accounting import REFERENCE_COSTS, cost_table
from gfkit.nn.network import ModelConfig, Network
from gfkit.reporters.base import ReportRow
from gfkit.reporters.csv import CsvReporter
from gfkit.synth.dataset import (
    MANIFEST_NAME,
    read_dataset,
    read_series,
    write_dataset,
)
from gfkit.synth.scene import SceneParams, generate_dataset
from gfkit.training.trainer import train

try:
    import ujson as json
except ImportError:  # pragma: no cover
    import json  # type: ignore

NON_ACTIONABLE_SUBCOMMANDS = ["version"]

# Exit codes
EXIT_SUCCESS = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class LoggingChoices(str, Enum):
    """
    Logging choices for CLI settings.
    """

    ERROR = "error"
    INFO = "info"
    DEBUG = "debug"


class TemporalChoices(str, Enum):
    NONE = "none"
    CONV = "conv"
    LTAE = "ltae"
    GRU = "gru"


app = typer.Typer(add_completion=False)


def print_message(message: str, color: str, bold: bool, should_exit: bool, code: int):
    """
    Print formatted message and exit if requested.
    """

    typer.echo(typer.style(message, fg=color, bold=bold))

    if should_exit:
        sys.exit(code)


def error_message(message: str, should_exit: bool = True, code: int = EXIT_FAILURE):
    """
    Print error message and exit the CLI application
    """

    print_message(message, typer.colors.RED, True, should_exit, code)


def success_message(message: str):
    """
    Print success message
    """

    print_message(message, typer.colors.GREEN, True, False, EXIT_SUCCESS)


@app.callback()
def callback(
    ctx: typer.Context,
    cfg: Path = typer.Option(
        DEFAULT_PROJECT_CONFIG,
        "--settings",
        "-s",
        help="Project file holding a [tool.gfkit] table.",
    ),
    log_level: Optional[LoggingChoices] = typer.Option(
        None, help="Set logging level, overrides GFK_LOG."
    ),
    device_threads: Optional[int] = typer.Option(
        None, help="Number of runs trained concurrently, overrides GFK_DEVICE_THREADS."
    ),
):
    """
    gfkit segments glacier zones and calving fronts in satellite image time
    series, and trains, evaluates and accounts the segmentation networks.
    """

    if ctx.invoked_subcommand in NON_ACTIONABLE_SUBCOMMANDS:
        return

    config.load(
        cfg,
        log=log_level.value if log_level else None,
        device_threads=device_threads,
    )

    ctx.ensure_object(dict)
    ctx.obj["config"] = config


@app.command(short_help="Print gfkit version.")
def version():
    """
    Print gfkit version.
    """

    typer.echo(__version__)


@app.command(short_help="Generate a synthetic dataset.")
def synth(
    out: Path = typer.Option(..., help="Destination directory of the dataset."),
    series: int = typer.Option(20, help="Number of series."),
    frames: int = typer.Option(8, help="Frames per series."),
    seed: int = typer.Option(0, help="Seed of the generator."),
    scene: Optional[Path] = typer.Option(
        None, "--config", help="Json file with scene parameters."
    ),
    preview: bool = typer.Option(False, help="Also write rendered masks."),
):
    """
    Generate ``series`` synthetic series and write them in the dataset layout.
    The output only depends on the options, so equal options produce equal
    directories.
    """

    params = SceneParams.parse_file(scene) if scene else SceneParams()
    samples = generate_dataset(params, series, frames, seed=seed)
    write_dataset(samples, out, preview=preview)
    success_message(f'{series} series written to "{out}"')


def _experiment_config(
    experiment: Optional[Path],
    out: Optional[Path],
    seed: Optional[int],
    temporal: Optional[TemporalChoices],
    frames: Optional[int],
    runs: Optional[int] = None,
    variants: Optional[List[str]] = None,
) -> ExperimentConfig:
    return load_experiment_config(
        experiment,
        output_dir=out,
        seed=seed,
        temporal=temporal.value if temporal else None,
        frames=frames,
        runs=runs,
        variants=variants or None,
    )


@app.command(name="train", short_help="Train one network.")
def train_command(
    experiment: Optional[Path] = typer.Option(
        None, "--config", help="Json file with the experiment configuration."
    ),
    out: Optional[Path] = typer.Option(None, help="Run directory."),
    seed: Optional[int] = typer.Option(None, help="Seed of the run and the data."),
    temporal: Optional[TemporalChoices] = typer.Option(
        None, help="Temporal connection."
    ),
    frames: Optional[int] = typer.Option(None, help="Temporal window T."),
):
    """
    Train a single run of the configured network on the training split and
    keep the checkpoint with the lowest validation MDE.
    """

    cfg = _experiment_config(experiment, out, seed, temporal, frames)
    splits = load_splits(cfg.data)

    model = Network(cfg.model, np.random.default_rng([cfg.train.seed, 1]))
    result = train(
        model,
        splits["train"],
        splits["val"],
        cfg.train.copy(update={"frames": cfg.model.frames}),
        cfg.output_dir,
    )
    success_message(
        f"Best validation MDE {result.best_mde_m:.1f} m at epoch {result.best_epoch}"
    )


@app.command(short_help="Run repeated trainings and report.")
def experiment(
    ctx: typer.Context,
    experiment_file: Optional[Path] = typer.Option(
        None, "--config", help="Json file with the experiment configuration."
    ),
    out: Optional[Path] = typer.Option(None, help="Experiment directory."),
    seed: Optional[int] = typer.Option(None, help="Seed of the runs and the data."),
    temporal: Optional[TemporalChoices] = typer.Option(
        None, help="Temporal connection."
    ),
    frames: Optional[int] = typer.Option(None, help="Temporal window T."),
    runs: Optional[int] = typer.Option(None, help="Runs per variant."),
    variant: Optional[List[TemporalChoices]] = typer.Option(
        None, help="Variant to compare, can be repeated."
    ),
):
    """
    Train ``runs`` networks per variant, evaluate them and their ensemble on
    the test split and write ``report.csv``.
    """

    cfg = _experiment_config(
        experiment_file,
        out,
        seed,
        temporal,
        frames,
        runs,
        [choice.value for choice in variant] if variant else None,
    )
    rows = run_experiment(cfg, workers=ctx.obj["config"].settings.device_threads)

    for row in rows:
        typer.echo(
            f"{row.model:>6} {row.run:>8}  MDE {row.mde_m}  "
            f"empty {row.empty_count}  mIoU {row.iou_all:.4f}"
        )

    success_message(f'Report written to "{Path(cfg.output_dir) / "report.csv"}"')


def _read_masks(path: Path) -> List[ZoneMask]:
    if (path / MANIFEST_NAME).exists():
        return [frame.mask for frame in read_series(path).frames]

    return [frame.mask for sample in read_dataset(path) for frame in sample.frames]


def _read_mask_file(path: Path, resolution: float) -> ZoneMask:
    return ZoneMask(np.asarray(Image.open(path), dtype=np.uint8), resolution)


def _read_rock_mask(path: Optional[Path], resolution: float) -> Optional[ZoneMask]:
    if path is None:
        return None

    return _read_mask_file(path, resolution)


@app.command(name="eval", short_help="Evaluate prediction masks.")
def eval_command(
    gt: Path = typer.Option(..., help="Ground truth series or dataset directory."),
    pred: Path = typer.Option(..., help="Predicted series or dataset directory."),
    ma_gt: Optional[Path] = typer.Option(
        None, help="Alternative ground truth for the MDE_MA column."
    ),
    rock_mask: Optional[Path] = typer.Option(
        None, help="Static rock mask (PGM) for the MDE_MA column."
    ),
    out: Optional[Path] = typer.Option(None, help="Write the report row as CSV."),
    model: str = typer.Option("prediction", help="Model name of the report row."),
    min_length: float = typer.Option(
        MIN_FRONT_LENGTH_M, help="Front length threshold."
    ),
):
    """
    Compute the report row of predicted masks against ground truth masks. Both
    directories must hold the same frames in the same order.
    """

    gt_masks, pred_masks = _read_masks(gt), _read_masks(pred)

    if len(gt_masks) != len(pred_masks):
        raise ConfigurationError(
            f"{len(gt_masks)} ground truth frames but {len(pred_masks)} predictions"
        )

    pairs = [
        (truth, mask, extract_front(truth, min_length_m=min_length))
        for truth, mask in zip(gt_masks, pred_masks)
    ]
    ma_fronts = None

    if ma_gt is not None:
        ma_fronts = [
            extract_front(mask, min_length_m=min_length) for mask in _read_masks(ma_gt)
        ]

    rock = _read_rock_mask(rock_mask, gt_masks[0].resolution_m_per_px)
    report = dataset_report(pairs, ma_fronts, rock, min_length_m=min_length)
    row = ReportRow(model=model, run="0", **report.dict())

    typer.echo(row.json(indent=2))

    if out is not None:
        CsvReporter([row], out).report()


@app.command(name="extract-front", short_help="Extract calving fronts from masks.")
def extract_front_command(
    mask: Path = typer.Option(..., help="Mask PGM file or series directory."),
    out: Path = typer.Option(..., help="Output Json file or directory."),
    resolution: Optional[float] = typer.Option(
        None, help="Meters per pixel, required for a single mask file."
    ),
    rock_mask: Optional[Path] = typer.Option(None, help="Static rock mask (PGM)."),
    min_length: float = typer.Option(
        MIN_FRONT_LENGTH_M, help="Front length threshold."
    ),
):
    """
    Write the fronts of a mask file, or of every frame of a series directory,
    as FrontSet Json.
    """

    if mask.is_dir():
        masks = _read_masks(mask)
        out.mkdir(parents=True, exist_ok=True)
        targets = [out / f"front_{index:04d}.json" for index in range(len(masks))]
    else:
        if resolution is None:
            raise ConfigurationError("--resolution is required for a single mask file")

        masks = [_read_mask_file(mask, resolution)]
        targets = [out]

    rock = _read_rock_mask(rock_mask, masks[0].resolution_m_per_px)

    for zone_mask, target in zip(masks, targets):
        fronts: FrontSet = extract_front(zone_mask, rock, min_length_m=min_length)
        fronts.write(target)

    success_message(f"{len(targets)} front sets written")


@app.command(short_help="Print parameter and compute accounting.")
def flops(
    model_file: Optional[Path] = typer.Option(
        None, "--config", help="Json file with a model configuration."
    ),
    desk: bool = typer.Option(False, help="Use the reduced configuration."),
):
    """
    Print the parameters and multiply-accumulate estimates of the network
    without and with each temporal connection, next to the published costs
    of the full-size variants. The GFLOPs column is normalized to one
    256x256 evaluated output like the published costs.
    """

    if model_file is not None:
        cfg = ModelConfig.parse_obj(json.loads(model_file.read_text()))
    else:
        cfg = ModelConfig.desk() if desk else ModelConfig()

    typer.echo(
        f"{'variant':<8} {'params':>12} {'added':>12} {'GMACs':>10} "
        f"{'GFLOPs':>8} {'overhead':>9}"
    )

    for row in cost_table(cfg):
        typer.echo(
            f"{row.variant:<8} {row.parameters:>12,} {row.added_parameters:>12,} "
            f"{row.macs / 1e9:>10.2f} {row.gflops:>8.1f} {row.overhead:>8.1%}"
        )

    typer.echo("")
    typer.echo(f"{'reference':<14} {'params (M)':>10} {'GFLOPs':>8}")

    for name, reference in REFERENCE_COSTS.items():
        typer.echo(
            f"{name:<14} {reference.parameters_m:>10.1f} {reference.gflops:>8.1f}"
        )


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run the command line interface and return its exit code: 0 on success,
    2 on usage or configuration errors and 1 on any other failure.
    """

    command = typer.main.get_command(app)

    try:
        command.main(args=argv, prog_name="gfkit", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.exceptions.Abort:
        error_message("Aborted", should_exit=False)
        return EXIT_FAILURE
    except (ConfigurationError, GeometryError, ValidationError) as exc:
        error_message(f"Invalid configuration: {exc}", should_exit=False)
        return EXIT_USAGE
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_FAILURE
    except Exception as exc:  # pylint: disable=broad-except
        logging.error("Command failed: %s", exc)
        error_message(f"Failed: {exc}", should_exit=False)
        return EXIT_FAILURE

    return EXIT_SUCCESS


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
