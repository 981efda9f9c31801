"""
The segmentation network: a hierarchical windowed-attention encoder and a
lightweight convolutional decoder with skip connections. Frames of a series
share every spatial weight; temporal connections inserted after the blocks
of the selected stages are the only paths between frames.

Stages are indexed from the finest (``0``, a quarter of the input size) to
the coarsest. The encoder keeps features channels-last ``(B, H, W, C)``, the
decoder channels-first ``(B, C, H, W)``, where ``B = N * T``.
"""

import logging
from typing import List, Optional, Set, Tuple, Union

import numpy as np
from pydantic import (  # pylint: disable=no-name-in-module
    BaseModel,
    root_validator,
    validator,
)

from gfkit.autodiff import functional as F
from gfkit.autodiff.tensor import Tensor
from gfkit.exceptions import ShapeError
from gfkit.nn.layers import Conv2d, GroupNorm, LayerNorm, Linear, norm_groups
from gfkit.nn.module import Module, ModuleList
from gfkit.nn.temporal import TemporalConnConfig, TemporalConnection, build_temporal

PATCH_SIZE = 4
MLP_RATIO = 4
DECODER_REDUCTION = 3
DECODER_MULTIPLE = 8


class ModelConfig(BaseModel):
    """
    Architecture hyperparameters. The defaults are the full-size network;
    :func:`ModelConfig.desk` returns the reduced configuration used for
    experiments on a single machine.
    """

    base_channels: int = 96
    channel_mult: List[int] = [1, 2, 4, 8]
    depths: List[int] = [2, 2, 6, 2]
    window_size: int = 8
    head_dim: int = 32
    num_classes: int = 4
    temporal: Optional[TemporalConnConfig] = None
    temporal_stages: Set[int] = {1, 2, 3}
    context: int = 512
    eval_crop: int = 256
    frames: int = 1

    @classmethod
    def desk(cls, **overrides) -> "ModelConfig":
        values = dict(
            base_channels=16,
            depths=[2, 2, 4, 2],
            window_size=4,
            context=128,
            eval_crop=64,
        )
        values.update(overrides)
        return cls(**values)

    @validator(
        "base_channels", "window_size", "head_dim", "num_classes", "context", "frames"
    )
    def check_positive(cls, value):  # pylint: disable=no-self-argument
        if value < 1:
            raise ValueError("must be a positive integer")

        return value

    @validator("channel_mult", "depths", each_item=True)
    def check_positive_items(cls, value):  # pylint: disable=no-self-argument
        if value < 1:
            raise ValueError("items must be positive integers")

        return value

    @root_validator(skip_on_failure=True)
    def check_geometry(cls, values):  # pylint: disable=no-self-argument
        stages = len(values["channel_mult"])
        context, eval_crop = values["context"], values["eval_crop"]

        if len(values["depths"]) != stages:
            raise ValueError("depths and channel_mult must have the same length")

        if context % (PATCH_SIZE * 2 ** (stages - 1)):
            raise ValueError(
                f"context {context} is not divisible by "
                f"{PATCH_SIZE * 2 ** (stages - 1)}"
            )

        if not 0 < eval_crop <= context or eval_crop % 2 or context % 2:
            raise ValueError("eval_crop must be even and not larger than the context")

        if any(stage < 0 or stage >= stages for stage in values["temporal_stages"]):
            raise ValueError(f"temporal stages must be within 0..{stages - 1}")

        if values["temporal"] is None and values["frames"] != 1:
            raise ValueError("a network without temporal connections takes T=1")

        for stage in range(stages):
            resolution = context // PATCH_SIZE // 2 ** stage
            window = min(values["window_size"], resolution)

            if resolution % window:
                raise ValueError(
                    f"stage {stage} resolution {resolution} is not divisible "
                    f"by window {window}"
                )

        return values

    @property
    def num_stages(self) -> int:
        return len(self.channel_mult)

    def stage_channels(self) -> List[int]:
        return [self.base_channels * mult for mult in self.channel_mult]

    def decoder_channels(self) -> List[int]:
        """
        Decoder widths: a third of the encoder widths, rounded to a multiple
        of eight.
        """

        return [
            max(
                DECODER_MULTIPLE,
                DECODER_MULTIPLE
                * int(round(channels / DECODER_REDUCTION / DECODER_MULTIPLE)),
            )
            for channels in self.stage_channels()
        ]

    def stage_resolutions(self) -> List[int]:
        return [
            self.context // PATCH_SIZE // 2 ** stage for stage in range(self.num_stages)
        ]

    def stage_windows(self) -> List[int]:
        return [min(self.window_size, res) for res in self.stage_resolutions()]

    def stage_heads(self) -> List[int]:
        heads = []

        for channels in self.stage_channels():
            count = max(1, channels // self.head_dim)
            while channels % count:
                count -= 1
            heads.append(count)

        return heads

    def without_temporal(self) -> "ModelConfig":
        return self.copy(update={"temporal": None, "frames": 1})

    def has_temporal(self, stage: int, decoder: bool = False) -> bool:
        if self.temporal is None or stage not in self.temporal_stages:
            return False

        return self.temporal.in_decoder if decoder else True


class WindowAttention(Module):
    """
    Multi-head self-attention inside non-overlapping windows.
    """

    def __init__(
        self, channels: int, heads: int, window: int, rng: np.random.Generator
    ) -> None:
        self.heads = heads
        self.window = window
        self.qkv = Linear(channels, 3 * channels, rng)
        self.proj = Linear(channels, channels, rng)

    def forward(self, x: Tensor) -> Tensor:  # pylint: disable=arguments-differ
        batch, height, width, channels = x.shape
        window, heads = self.window, self.heads
        head_dim = channels // heads
        rows, cols = height // window, width // window

        windows = x.reshape(batch, rows, window, cols, window, channels)
        windows = windows.permute(0, 1, 3, 2, 4, 5)
        windows = windows.reshape(batch * rows * cols, window * window, channels)

        qkv = self.qkv(windows).reshape(-1, window * window, 3, heads, head_dim)
        qkv = qkv.permute(2, 0, 3, 1, 4)
        query, key, value = qkv[0], qkv[1].permute(0, 1, 3, 2), qkv[2]

        weights = F.softmax((query @ key) * (1.0 / np.sqrt(head_dim)), axis=-1)
        attended = (weights @ value).permute(0, 2, 1, 3)
        attended = self.proj(attended.reshape(-1, window * window, channels))

        merged = attended.reshape(batch, rows, cols, window, window, channels)
        merged = merged.permute(0, 1, 3, 2, 4, 5)
        return merged.reshape(batch, height, width, channels)


class SwinBlock(Module):
    """
    Pre-norm windowed attention and MLP. Blocks with a shift roll the feature
    map cyclically by half a window before partitioning; no border mask is
    applied.
    """

    def __init__(
        self,
        channels: int,
        heads: int,
        window: int,
        shift: int,
        rng: np.random.Generator,
    ) -> None:
        self.shift = shift
        self.norm1 = LayerNorm(channels)
        self.attn = WindowAttention(channels, heads, window, rng)
        self.norm2 = LayerNorm(channels)
        self.fc1 = Linear(channels, MLP_RATIO * channels, rng)
        self.fc2 = Linear(MLP_RATIO * channels, channels, rng)

    def forward(self, x: Tensor) -> Tensor:  # pylint: disable=arguments-differ
        hidden = self.norm1(x)

        if self.shift:
            hidden = F.roll(hidden, (-self.shift, -self.shift), (1, 2))

        hidden = self.attn(hidden)

        if self.shift:
            hidden = F.roll(hidden, (self.shift, self.shift), (1, 2))

        x = x + hidden
        return x + self.fc2(F.gelu(self.fc1(self.norm2(x))))


class PatchMerging(Module):
    """
    Halve the resolution by stacking every 2x2 neighbourhood into the channel
    axis and projecting it linearly.
    """

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator):
        self.norm = LayerNorm(4 * in_channels)
        self.reduction = Linear(4 * in_channels, out_channels, rng, bias=False)

    def forward(self, x: Tensor) -> Tensor:  # pylint: disable=arguments-differ
        batch, height, width, channels = x.shape
        x = x.reshape(batch, height // 2, 2, width // 2, 2, channels)
        x = x.permute(0, 1, 3, 2, 4, 5).reshape(
            batch, height // 2, width // 2, 4 * channels
        )
        return self.reduction(self.norm(x))


class ResBlock(Module):
    """
    Two norm, activation, convolution sequences with a residual path. The
    residual path gets a 1x1 convolution only if the channel count changes.
    """

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator):
        self.norm1 = GroupNorm(in_channels, norm_groups(in_channels))
        self.conv1 = Conv2d(in_channels, out_channels, 3, rng)
        self.norm2 = GroupNorm(out_channels, norm_groups(out_channels))
        self.conv2 = Conv2d(out_channels, out_channels, 3, rng)
        self.skip = (
            Conv2d(in_channels, out_channels, 1, rng)
            if in_channels != out_channels
            else None
        )

    def forward(self, x: Tensor) -> Tensor:  # pylint: disable=arguments-differ
        hidden = self.conv1(F.gelu(self.norm1(x)))
        hidden = self.conv2(F.gelu(self.norm2(hidden)))
        shortcut = x if self.skip is None else self.skip(x)
        return shortcut + hidden


class UpsampleBlock(Module):
    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator):
        self.conv = Conv2d(in_channels, out_channels, 3, rng)

    def forward(self, x: Tensor) -> Tensor:  # pylint: disable=arguments-differ
        return self.conv(F.upsample2x(x))


class EncoderStage(Module):
    def __init__(
        self, cfg: ModelConfig, stage: int, rng: np.random.Generator
    ) -> None:
        channels = cfg.stage_channels()[stage]
        window = cfg.stage_windows()[stage]
        resolution = cfg.stage_resolutions()[stage]
        heads = cfg.stage_heads()[stage]
        shift = window // 2 if window < resolution else 0

        self.merge = (
            PatchMerging(cfg.stage_channels()[stage - 1], channels, rng)
            if stage
            else None
        )
        self.blocks = ModuleList()
        self.temporal = ModuleList()

        for index in range(cfg.depths[stage]):
            self.blocks.append(
                SwinBlock(channels, heads, window, shift if index % 2 else 0, rng)
            )

            if cfg.has_temporal(stage):
                self.temporal.append(build_temporal(cfg.temporal, channels, rng))

    def forward(  # pylint: disable=arguments-differ
        self, x: Tensor, frames: int, dates: Optional[np.ndarray]
    ) -> Tensor:
        if self.merge is not None:
            x = self.merge(x)

        for index, block in enumerate(self.blocks):
            x = block(x)

            if len(self.temporal):
                x = _apply_temporal(self.temporal[index], x, frames, dates)

        return x


class DecoderStage(Module):
    def __init__(
        self, cfg: ModelConfig, stage: int, rng: np.random.Generator
    ) -> None:
        encoder = cfg.stage_channels()
        decoder = cfg.decoder_channels()
        last = stage == cfg.num_stages - 1

        self.upsample = (
            None if last else UpsampleBlock(decoder[stage + 1], decoder[stage], rng)
        )
        in_channels = encoder[stage] if last else decoder[stage] + encoder[stage]
        self.block = ResBlock(in_channels, decoder[stage], rng)
        self.temporal = (
            build_temporal(cfg.temporal, decoder[stage], rng)
            if cfg.has_temporal(stage, decoder=True)
            else None
        )

    def forward(  # pylint: disable=arguments-differ
        self,
        skip: Tensor,
        below: Optional[Tensor],
        frames: int,
        dates: Optional[np.ndarray],
    ) -> Tensor:
        if self.upsample is None or below is None:
            x = self.block(skip)
        else:
            x = self.block(F.concat([self.upsample(below), skip], axis=1))

        if self.temporal is not None:
            channels_last = _apply_temporal(
                self.temporal, x.permute(0, 2, 3, 1), frames, dates
            )
            x = channels_last.permute(0, 3, 1, 2)

        return x


def _apply_temporal(
    connection: TemporalConnection,
    x: Tensor,
    frames: int,
    dates: Optional[np.ndarray],
) -> Tensor:
    """
    Run a temporal connection on channels-last frame features.
    """

    batch, height, width, channels = x.shape
    series = x.reshape(batch // frames, frames, height * width, channels)
    return connection(series, dates).reshape(batch, height, width, channels)


class Network(Module):
    """
    Segmentation network producing per-frame logits of shape
    ``(N, T, num_classes, context, context)`` from a series of shape
    ``(N, T, 1, context, context)``.

    Example usage:

    .. code-block:: python

        >>> import numpy as np
        >>> from gfkit.autodiff import Tensor, no_grad
        >>> from gfkit.nn import ModelConfig, Network, TemporalConnConfig
        >>>
        >>> cfg = ModelConfig.desk(temporal=TemporalConnConfig(kind="conv"), frames=4)
        >>> model = Network(cfg, np.random.default_rng(0))
        >>> series = Tensor(np.zeros((2, 4, 1, 128, 128)))
        >>> with no_grad():
        >>>     logits = model(series, dates=np.arange(4))
        >>> logits.shape
        (2, 4, 4, 128, 128)

    :param cfg: Architecture hyperparameters
    :type cfg: ModelConfig

    :param rng: Random generator used for the initial weights
    :type rng: np.random.Generator
    """

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator) -> None:
        validate_config(cfg)

        self.cfg = cfg
        channels = cfg.stage_channels()
        decoder = cfg.decoder_channels()

        self.patch_embed = Conv2d(1, channels[0], PATCH_SIZE, rng, stride=PATCH_SIZE)
        self.patch_norm = LayerNorm(channels[0])
        self.encoder = ModuleList(
            EncoderStage(cfg, stage, rng) for stage in range(cfg.num_stages)
        )
        self.decoder = ModuleList(
            DecoderStage(cfg, stage, rng) for stage in range(cfg.num_stages)
        )
        self.head_up1 = UpsampleBlock(decoder[0], decoder[0], rng)
        self.head_up2 = UpsampleBlock(decoder[0], decoder[0], rng)
        self.head = Conv2d(decoder[0], cfg.num_classes, 3, rng)

        logging.debug(
            "Built network with %d parameters (temporal: %s)",
            self.num_parameters(),
            cfg.temporal.kind.value if cfg.temporal else "none",
        )

    def check_input(self, sits: Tensor) -> Tuple[int, int]:
        """
        Validate the input series and return its batch size and length.

        :raises: ``ShapeError`` if the input is not ``(N, T, 1, context, context)``
        """

        context = self.cfg.context

        if sits.ndim != 5 or sits.shape[2] != 1:
            raise ShapeError(
                f"expected a series of shape (N, T, 1, {context}, {context}), "
                f"got {sits.shape}"
            )

        if sits.shape[3] != sits.shape[4]:
            raise ShapeError(f"expected square frames, got {sits.shape[3:]}")

        if sits.shape[3] != context:
            raise ShapeError(f"expected frames of side {context}, got {sits.shape[3]}")

        batch, frames = sits.shape[:2]

        if frames < 1:
            raise ShapeError("a series needs at least one frame")

        if self.cfg.temporal is None and frames != 1:
            raise ShapeError(
                f"a network without temporal connections takes T=1, got T={frames}"
            )

        return batch, frames

    def forward(  # pylint: disable=arguments-differ
        self, sits: Tensor, dates: Optional[np.ndarray] = None
    ) -> Tensor:
        batch, frames = self.check_input(sits)
        context = self.cfg.context

        x = sits.reshape(batch * frames, 1, context, context)
        x = self.patch_norm(self.patch_embed(x).permute(0, 2, 3, 1))

        skips: List[Tensor] = []
        for stage in self.encoder:
            x = stage(x, frames, dates)
            skips.append(x.permute(0, 3, 1, 2))

        below: Optional[Tensor] = None
        for index in range(self.cfg.num_stages - 1, -1, -1):
            below = self.decoder[index](skips[index], below, frames, dates)

        logits = self.head(self.head_up2(self.head_up1(below)))
        return logits.reshape(batch, frames, self.cfg.num_classes, context, context)


ArrayOrTensor = Union[Tensor, np.ndarray]


def crop_for_eval(logits: ArrayOrTensor, eval_crop: int) -> ArrayOrTensor:
    """
    Keep the centered ``eval_crop`` square of every frame.

    :param logits: Array or tensor whose last two axes are square frames
    :type logits: Union[Tensor, np.ndarray]

    :param eval_crop: Side of the retained square
    :type eval_crop: int

    :raises: ``ShapeError`` if the crop does not fit or the margin is uneven
    """

    side = logits.shape[-1]
    margin = side - eval_crop

    if logits.shape[-2] != side or margin < 0:
        raise ShapeError(
            f"cannot crop {eval_crop}x{eval_crop} from frames of shape "
            f"{logits.shape[-2:]}"
        )

    if margin % 2:
        raise ShapeError(
            f"odd margin {margin} between frame side {side} and crop {eval_crop}"
        )

    start = margin // 2

    if isinstance(logits, Tensor):
        return F.crop(logits, start, start, eval_crop, eval_crop)

    return logits[..., start : start + eval_crop, start : start + eval_crop]


def validate_config(cfg: ModelConfig) -> None:
    """
    Check that a configuration can be built into a network.

    :raises: ``ConfigurationError`` if a temporal connection does not fit a stage
    """

    if cfg.temporal is None:
        return

    encoder, decoder = cfg.stage_channels(), cfg.decoder_channels()

    for stage in range(cfg.num_stages):
        if cfg.has_temporal(stage):
            cfg.temporal.check_channels(encoder[stage])

        if cfg.has_temporal(stage, decoder=True):
            cfg.temporal.check_channels(decoder[stage])

