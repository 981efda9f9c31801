import csv
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pydantic
import pytest

from gfkit.autodiff import load_checkpoint
from gfkit.autodiff.tensor import Tensor
from gfkit.exceptions import AbortRunError, ConfigurationError
from gfkit.nn.network import Network
from gfkit.synth.scene import generate
from gfkit.training.augment import AugmentConfig
from gfkit.training.trainer import (
    CURVE_FIELDS,
    CurveRow,
    TrainConfig,
    draw_window,
    fit_context,
    train,
    write_curves,
)
from tests.fixtures import temporary_dir
from tests.helpers import TINY_CONTEXT, random_series, small_scene, tiny_model_config

assert temporary_dir


def tiny_train_config(**overrides) -> TrainConfig:
    values = dict(
        epochs=2,
        series_per_epoch=2,
        batch_series=1,
        augment=AugmentConfig.disabled(),
        min_front_length_m=0.0,
    )
    values.update(overrides)
    return TrainConfig(**values)


def tiny_sets(frames: int = 2):
    train_set = [generate(small_scene(seed=seed), frames) for seed in range(2)]
    val_set = [generate(small_scene(seed=10, side=24, melange_extent_px=2), frames)]
    return train_set, val_set


def test_desk_schedule():
    cfg = TrainConfig.desk()

    assert (cfg.epochs, cfg.series_per_epoch, cfg.batch_series) == (12, 96, 4)
    assert cfg.batches_per_epoch == 24
    assert TrainConfig(series_per_epoch=10, batch_series=4).batches_per_epoch == 3


@pytest.mark.parametrize(
    "overrides",
    [dict(lr=0.0), dict(epochs=0), dict(label_smoothing=1.5), dict(plateau_factor=1.0)],
)
def test_invalid_train_config(overrides):
    with pytest.raises(pydantic.ValidationError):
        TrainConfig(**overrides)


def test_fit_context_pads_small_frames():
    array = np.arange(12, dtype=np.float64).reshape(1, 3, 4)

    padded = fit_context(array, 6)

    assert padded.shape == (1, 6, 6)
    assert np.array_equal(padded[:, :3, :4], array)
    assert fit_context(array, 3) is array


def test_draw_window():
    sample = random_series(frames=4, side=24)

    window = draw_window(sample, 2, TINY_CONTEXT, np.random.default_rng(0))

    assert len(window) == 2
    assert window.shape == (TINY_CONTEXT, TINY_CONTEXT)
    assert window.day_offsets()[1] == 6.0


def test_write_curves(temporary_dir):
    path = Path(temporary_dir) / "curves.csv"

    write_curves(path, [CurveRow(1, 0.5, 120.0, 0.25, 0.01)])

    with path.open() as file:
        rows = list(csv.reader(file))

    assert rows == [CURVE_FIELDS, ["1", "0.5", "120.0", "0.25", "0.01"]]


def test_frames_must_match_the_network(temporary_dir):
    model = Network(tiny_model_config(), np.random.default_rng(0))

    with pytest.raises(ConfigurationError):
        train(model, *tiny_sets(), tiny_train_config(frames=2), temporary_dir)


def test_sets_must_not_be_empty(temporary_dir):
    model = Network(tiny_model_config(), np.random.default_rng(0))
    train_set, _ = tiny_sets()

    with pytest.raises(ConfigurationError):
        train(model, train_set, [], tiny_train_config(), temporary_dir)


def test_series_must_cover_the_window(temporary_dir):
    model = Network(tiny_model_config("conv", frames=3), np.random.default_rng(0))

    with pytest.raises(ConfigurationError):
        train(model, *tiny_sets(frames=2), tiny_train_config(), temporary_dir)


@patch("gfkit.training.trainer.segmentation_loss")
def test_diverging_loss_aborts(mocked_loss, temporary_dir):
    mocked_loss.return_value = Tensor(np.array(np.nan))
    model = Network(tiny_model_config(), np.random.default_rng(0))

    with pytest.raises(AbortRunError):
        train(model, *tiny_sets(), tiny_train_config(), temporary_dir)

    assert not (Path(temporary_dir) / "final.ckpt").exists()


@pytest.mark.slow
def test_tiny_run_writes_artifacts(temporary_dir):
    model = Network(tiny_model_config(), np.random.default_rng(0))

    result = train(model, *tiny_sets(), tiny_train_config(), temporary_dir)

    assert [row.epoch for row in result.curves] == [1, 2]
    assert result.best_epoch in (1, 2)
    assert all(np.isfinite(row.train_loss) for row in result.curves)
    assert result.curves[0].lr == 0.01

    run_dir = Path(temporary_dir)
    assert (run_dir / "config.json").exists()
    assert (run_dir / "curves.csv").exists()

    final = load_checkpoint(result.checkpoints["final"])
    assert set(final) == set(model.state_dict())
    assert result.checkpoints["best"].exists()


@pytest.mark.slow
def test_same_seed_same_curves(temporary_dir):
    cfg = tiny_train_config(augment=AugmentConfig())
    runs = []

    for name in ("first", "second"):
        model = Network(tiny_model_config("ltae", frames=2), np.random.default_rng(0))
        runs.append(train(model, *tiny_sets(), cfg, Path(temporary_dir) / name))

    assert runs[0].curves == runs[1].curves
