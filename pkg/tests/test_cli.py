from pathlib import Path
from unittest.mock import Mock, patch

from typer.colors import GREEN, RED

from gfkit import __version__
from gfkit.main import (
    DEFAULT_PROJECT_CONFIG,
    EXIT_FAILURE,
    NON_ACTIONABLE_SUBCOMMANDS,
    LoggingChoices,
    TemporalChoices,
    callback,
    error_message,
    experiment,
    flops,
    print_message,
    success_message,
    synth,
    train_command,
    version,
)
from gfkit.nn.network import ModelConfig
from gfkit.nn.temporal import TemporalKind
from gfkit.reporters.base import ReportRow
from gfkit.synth.scene import SceneParams


@patch("gfkit.main.typer")
def test_print_message(mock_typer):
    mocked_styled_message = Mock()
    mock_typer.style.return_value = mocked_styled_message

    print_message("test", GREEN, True, False, 0)

    mock_typer.style.assert_called_once_with("test", fg=GREEN, bold=True)
    mock_typer.echo.assert_called_once_with(mocked_styled_message)


@patch("gfkit.main.sys")
@patch("gfkit.main.typer")
def test_print_message_with_exit(mock_typer, mock_sys):
    print_message("test", GREEN, True, True, 2)

    mock_typer.echo.assert_called_once_with(mock_typer.style.return_value)
    mock_sys.exit.assert_called_once_with(2)


@patch("gfkit.main.print_message")
def test_success_message_printed(mock_print):
    success_message("test")

    mock_print.assert_called_once_with("test", GREEN, True, False, 0)


@patch("gfkit.main.print_message")
def test_error_message_printed(mock_print):
    error_message("test")

    mock_print.assert_called_once_with("test", RED, True, True, EXIT_FAILURE)


@patch("gfkit.main.config")
def test_callback_loads_config(mock_config):
    ctx = Mock()
    ctx.invoked_subcommand = "synth"
    ctx.obj = dict()

    # Passing every parameter, because typer does not resolve the
    # typer.Option defaults outside of the command line
    callback(ctx, Path(DEFAULT_PROJECT_CONFIG), LoggingChoices.DEBUG, 2)

    mock_config.load.assert_called_once_with(
        Path(DEFAULT_PROJECT_CONFIG), log="debug", device_threads=2
    )
    ctx.ensure_object.assert_called_once_with(dict)
    assert ctx.obj["config"] == mock_config


@patch("gfkit.main.config")
def test_callback_without_overrides(mock_config):
    ctx = Mock()
    ctx.invoked_subcommand = "eval"
    ctx.obj = dict()

    callback(ctx, Path(DEFAULT_PROJECT_CONFIG), None, None)

    mock_config.load.assert_called_once_with(
        Path(DEFAULT_PROJECT_CONFIG), log=None, device_threads=None
    )


@patch("gfkit.main.config")
def test_callback_skips_config_load(mock_config):
    ctx = Mock()
    ctx.invoked_subcommand = NON_ACTIONABLE_SUBCOMMANDS[0]

    callback(ctx)

    assert mock_config.load.called is False
    assert ctx.ensure_object.called is False


@patch("gfkit.main.typer")
def test_version(mock_typer):
    version()
    mock_typer.echo.assert_called_once_with(__version__)


@patch("gfkit.main.success_message")
@patch("gfkit.main.write_dataset")
@patch("gfkit.main.generate_dataset")
def test_synth(mock_generate, mock_write, mock_success_message):
    synth(Path("data"), 3, 2, 7, None, True)

    mock_generate.assert_called_once_with(SceneParams(), 3, 2, seed=7)
    mock_write.assert_called_once_with(
        mock_generate.return_value, Path("data"), preview=True
    )
    mock_success_message.assert_called_once_with('3 series written to "data"')


@patch("gfkit.main.success_message")
@patch("gfkit.main.Network")
@patch("gfkit.main.train")
@patch("gfkit.main.load_splits")
def test_train_command(mock_splits, mock_train, mock_network, mock_success_message):
    mock_splits.return_value = {"train": ["train"], "val": ["val"]}
    mock_train.return_value = Mock(best_mde_m=412.25, best_epoch=3)

    train_command(None, Path("run"), 5, TemporalChoices.LTAE, 4)

    model_cfg = mock_network.call_args[0][0]
    assert model_cfg.temporal.kind == TemporalKind.LTAE
    assert model_cfg.frames == 4

    model, train_set, val_set, train_cfg, run_dir = mock_train.call_args[0]
    assert model == mock_network.return_value
    assert (train_set, val_set) == (["train"], ["val"])
    assert (train_cfg.seed, train_cfg.frames) == (5, 4)
    assert run_dir == Path("run")

    mock_success_message.assert_called_once_with(
        "Best validation MDE 412.2 m at epoch 3"
    )


@patch("gfkit.main.typer")
@patch("gfkit.main.success_message")
@patch("gfkit.main.run_experiment")
def test_experiment(mock_run, mock_success_message, mock_typer):
    mock_run.return_value = [ReportRow(model="none", run="0", mde_m=300.0)]

    ctx = Mock()
    ctx.obj = {"config": Mock()}
    ctx.obj["config"].settings.device_threads = 2

    experiment(
        ctx,
        None,
        Path("exp"),
        None,
        None,
        None,
        2,
        [TemporalChoices.NONE, TemporalChoices.CONV],
    )

    cfg = mock_run.call_args[0][0]
    assert cfg.variants == ["none", "conv"]
    assert cfg.runs == 2
    assert cfg.output_dir == Path("exp")
    assert mock_run.call_args[1] == {"workers": 2}
    assert mock_typer.echo.call_count == 1
    mock_success_message.assert_called_once_with(
        f'Report written to "{Path("exp") / "report.csv"}"'
    )


@patch("gfkit.main.typer")
@patch("gfkit.main.cost_table")
def test_flops_desk(mock_cost_table, mock_typer):
    mock_cost_table.return_value = []

    flops(None, True)

    mock_cost_table.assert_called_once_with(ModelConfig.desk())
    assert mock_typer.echo.called
