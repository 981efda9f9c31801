"""
Temporal connections exchange information along the time axis of a
``(N, T, P, C)`` feature map, independently at every spatial position ``P``.
Each connection is a residual block which is an exact identity at
initialization, so inserting it into a mono-temporal network does not change
the network's initial output.

Three kinds are available:

* ``conv``: 1D convolution over time, group norm and SiLU
* ``ltae``: channel grouped attention over time with a date based
  positional encoding, scaled by a learned factor initialized as zero
* ``gru``: bidirectional gated recurrence over a half-width projection
"""

from abc import abstractmethod
from enum import Enum
import logging
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, validator  # pylint: disable=no-name-in-module

from gfkit.autodiff import functional as F
from gfkit.autodiff.tensor import Tensor
from gfkit.exceptions import ConfigurationError, ShapeError
from gfkit.nn import init
from gfkit.nn.layers import Linear
from gfkit.nn.module import Module, ModuleList

DEFAULT_HEADS = 4
DEFAULT_KERNEL_SIZE = 3
DEFAULT_GROUPS = 8
DEFAULT_PE_PERIOD = 1000.0


class TemporalKind(str, Enum):
    CONV = "conv"
    LTAE = "ltae"
    GRU = "gru"


class TemporalConnConfig(BaseModel):
    """
    Hyperparameters of a temporal connection. The channel count is given by
    the stage the connection is inserted into.

    ``decoder`` controls whether the connection is also inserted after the
    decoder blocks of the temporal stages; when not set, only the ``conv``
    kind is inserted there.
    """

    kind: TemporalKind
    heads: int = DEFAULT_HEADS
    kernel_size: int = DEFAULT_KERNEL_SIZE
    groups: int = DEFAULT_GROUPS
    pe_dim: Optional[int] = None
    pe_period: float = DEFAULT_PE_PERIOD
    mlp_hidden: List[int] = []
    decoder: Optional[bool] = None

    @validator("heads", "groups", "kernel_size", "pe_dim")
    def check_positive(cls, value):  # pylint: disable=no-self-argument
        if value is not None and value < 1:
            raise ValueError("must be a positive integer")

        return value

    @validator("kernel_size")
    def check_odd_kernel(cls, value):  # pylint: disable=no-self-argument
        if value % 2 == 0:
            raise ValueError("must be odd to preserve the temporal length")

        return value

    @validator("pe_period")
    def check_period(cls, value):  # pylint: disable=no-self-argument
        if value <= 0:
            raise ValueError("must be positive")

        return value

    @validator("mlp_hidden", each_item=True)
    def check_hidden(cls, value):  # pylint: disable=no-self-argument
        if value < 1:
            raise ValueError("hidden sizes must be positive")

        return value

    @property
    def in_decoder(self) -> bool:
        if self.decoder is None:
            return self.kind == TemporalKind.CONV

        return self.decoder

    def check_channels(self, channels: int) -> None:
        """
        Validate the config against the channel count of a stage.

        :raises: ``ConfigurationError`` if the channels cannot be split as needed
        """

        if self.kind == TemporalKind.CONV and channels % self.groups:
            raise ConfigurationError(
                f"conv connection: {channels} channels are not divisible "
                f"into {self.groups} groups"
            )

        if self.kind == TemporalKind.LTAE:
            if channels % self.heads:
                raise ConfigurationError(
                    f"ltae connection: {channels} channels are not divisible "
                    f"into {self.heads} heads"
                )

            pe_dim = self.pe_dim or channels // self.heads
            if channels % pe_dim:
                raise ConfigurationError(
                    f"ltae connection: positional encoding of width {pe_dim} "
                    f"does not tile {channels} channels"
                )

        if self.kind == TemporalKind.GRU and channels % 2:
            raise ConfigurationError(
                f"gru connection: {channels} channels cannot be halved"
            )


class MLP(Module):
    """
    Stack of linear layers with ReLU in between. Without hidden sizes it is a
    single linear layer.
    """

    def __init__(
        self,
        in_features: int,
        out_features: int,
        hidden: Sequence[int],
        rng: np.random.Generator,
        zero_last: bool = False,
    ) -> None:
        widths = [in_features, *hidden, out_features]
        last = len(widths) - 2

        self.layers = ModuleList(
            Linear(widths[i], widths[i + 1], rng, zero=zero_last and i == last)
            for i in range(len(widths) - 1)
        )

    def forward(self, x: Tensor) -> Tensor:  # pylint: disable=arguments-differ
        for index, layer in enumerate(self.layers):
            if index:
                x = F.relu(x)
            x = layer(x)

        return x


class TemporalConnection(Module):
    """
    Abstract residual block over the time axis.

    :param cfg: Connection hyperparameters
    :type cfg: TemporalConnConfig

    :param channels: Channel count of the feature map
    :type channels: int

    :param rng: Random generator used for the initial weights
    :type rng: np.random.Generator
    """

    def __init__(
        self, cfg: TemporalConnConfig, channels: int, rng: np.random.Generator
    ) -> None:
        cfg.check_channels(channels)
        self.cfg = cfg
        self.channels = channels

    def forward(  # pylint: disable=arguments-differ
        self, x: Tensor, dates: Optional[np.ndarray] = None
    ) -> Tensor:
        if x.ndim != 4 or x.shape[-1] != self.channels:
            raise ShapeError(
                f"{self.__class__.__name__} expects (N, T, P, {self.channels}), "
                f"got {x.shape}"
            )

        return self.mix(x, dates)

    @abstractmethod
    def mix(self, x: Tensor, dates: Optional[np.ndarray]) -> Tensor:
        """
        Compute the output for a validated ``(N, T, P, C)`` input.
        """


class TemporalConv(TemporalConnection):
    def __init__(
        self, cfg: TemporalConnConfig, channels: int, rng: np.random.Generator
    ) -> None:
        super().__init__(cfg, channels, rng)
        self.weight = init.zeros((channels, channels, cfg.kernel_size))
        self.bias = init.zeros((channels,))
        self.norm_weight = init.ones((channels,))
        self.norm_bias = init.zeros((channels,))

    def mix(self, x: Tensor, dates: Optional[np.ndarray]) -> Tensor:
        batch, length, positions, channels = x.shape
        mixed = F.conv1d(
            x, self.weight, self.bias, axis=1, padding=self.cfg.kernel_size // 2
        )

        # Normalize every position on its own: (N * P, C, T)
        rows = mixed.permute(0, 2, 3, 1).reshape(batch * positions, channels, length)
        normed = F.group_norm(rows, self.norm_weight, self.norm_bias, self.cfg.groups)
        normed = normed.reshape(batch, positions, channels, length).permute(0, 3, 1, 2)

        return x + F.silu(normed)


def positional_encoding(
    dates: np.ndarray, width: int, period: float = DEFAULT_PE_PERIOD
) -> np.ndarray:
    """
    Sinusoidal encoding of the acquisition dates, where the position of a frame
    is its day offset from the first frame of its series.

    :param dates: Day offsets of shape ``(T,)`` or ``(N, T)``
    :type dates: np.ndarray

    :param width: Encoding width
    :type width: int

    :return: Returns an array of shape ``dates.shape + (width,)``
    :rtype: np.ndarray
    """

    dates = np.asarray(dates, dtype=np.float64)
    offsets = dates - dates[..., :1]
    exponents = 2.0 * (np.arange(width) // 2) / width
    angles = offsets[..., None] / np.power(period, exponents)

    return np.where(np.arange(width) % 2 == 0, np.sin(angles), np.cos(angles))


class TemporalAttention(TemporalConnection):
    """
    Channel grouped multi-head attention over time. Every head sees only its
    own group of ``C / heads`` channels and computes a query for every frame.
    The attention weights of the last forward pass are kept per head in
    ``attention`` as ``(N, P, T, T)`` arrays.
    """

    def __init__(
        self, cfg: TemporalConnConfig, channels: int, rng: np.random.Generator
    ) -> None:
        super().__init__(cfg, channels, rng)
        self.group_width = channels // cfg.heads
        self.pe_dim = cfg.pe_dim or self.group_width

        self.query = ModuleList(
            Linear(self.group_width, self.group_width, rng) for _ in range(cfg.heads)
        )
        self.key = ModuleList(
            Linear(self.group_width, self.group_width, rng) for _ in range(cfg.heads)
        )
        self.value = ModuleList(
            Linear(self.group_width, self.group_width, rng) for _ in range(cfg.heads)
        )
        self.mlp = MLP(channels, channels, cfg.mlp_hidden, rng)
        self.alpha = init.zeros((1,))
        self.attention: List[np.ndarray] = []

    def _encoding(self, x: Tensor, dates: Optional[np.ndarray]) -> Tensor:
        batch, length, positions, channels = x.shape
        dates = np.zeros(length) if dates is None else np.asarray(dates, np.float64)

        if dates.shape[-1] != length or dates.ndim > 2 or (
            dates.ndim == 2 and dates.shape[0] not in (1, batch)
        ):
            raise ShapeError(
                f"dates of shape {dates.shape} do not match {length} frames "
                f"of a batch of {batch}"
            )

        if np.any(np.diff(dates, axis=-1) < 0):
            raise ConfigurationError("acquisition dates must be non-decreasing")

        encoding = positional_encoding(dates, self.pe_dim, self.cfg.pe_period)
        encoding = np.tile(encoding, channels // self.pe_dim)
        encoding = encoding.reshape((-1, length, 1, channels))

        return Tensor(np.broadcast_to(encoding, x.shape))

    def mix(self, x: Tensor, dates: Optional[np.ndarray]) -> Tensor:
        encoded = x + self._encoding(x, dates)
        width = self.group_width
        scale = 1.0 / np.sqrt(width)

        heads: List[Tensor] = []
        self.attention = []

        for head in range(self.cfg.heads):
            group = encoded[..., head * width : (head + 1) * width]

            # (N, P, T, width)
            query = self.query[head](group).permute(0, 2, 1, 3)
            key = self.key[head](group).permute(0, 2, 3, 1)
            value = self.value[head](group).permute(0, 2, 1, 3)

            weights = F.softmax((query @ key) * scale, axis=-1)
            self.attention.append(weights.data)
            heads.append((weights @ value).permute(0, 2, 1, 3))

        attended = F.concat(heads, axis=-1)
        return x + self.alpha * self.mlp(attended)


class GRUCell(Module):
    """
    Gated recurrent unit with reset gate applied to the hidden projection.
    """

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator):
        std = 1.0 / np.sqrt(hidden_size)
        self.hidden_size = hidden_size
        self.input_weight = init.normal((input_size, 3 * hidden_size), std, rng)
        self.input_bias = init.zeros((3 * hidden_size,))
        self.hidden_weight = init.normal((hidden_size, 3 * hidden_size), std, rng)
        self.hidden_bias = init.zeros((3 * hidden_size,))

    def project(self, x: Tensor) -> Tensor:
        return F.linear(x, self.input_weight, self.input_bias)

    def forward(  # pylint: disable=arguments-differ
        self, projected: Tensor, hidden: Tensor
    ) -> Tensor:
        """
        Advance one step given the input projection of the step.
        """

        size = self.hidden_size
        recurrent = F.linear(hidden, self.hidden_weight, self.hidden_bias)

        reset = F.sigmoid(projected[..., :size] + recurrent[..., :size])
        update = F.sigmoid(
            projected[..., size : 2 * size] + recurrent[..., size : 2 * size]
        )
        candidate = F.tanh(
            projected[..., 2 * size :] + reset * recurrent[..., 2 * size :]
        )

        return (1.0 - update) * candidate + update * hidden


def scan(cell: GRUCell, sequence: Tensor, reverse: bool = False) -> List[Tensor]:
    """
    Run a cell over axis 1 of a ``(N, T, P, C)`` sequence from a zero state.

    :return: Returns the hidden state of every step, in the sequence's order
    :rtype: List[Tensor]
    """

    projected = cell.project(sequence)
    batch, length, positions = sequence.shape[:3]
    hidden = Tensor(np.zeros((batch, positions, cell.hidden_size)))
    states: List[Optional[Tensor]] = [None] * length

    steps = range(length - 1, -1, -1) if reverse else range(length)

    for step in steps:
        hidden = cell(projected[:, step], hidden)
        states[step] = hidden

    return states  # type: ignore


class TemporalGRU(TemporalConnection):
    def __init__(
        self, cfg: TemporalConnConfig, channels: int, rng: np.random.Generator
    ) -> None:
        super().__init__(cfg, channels, rng)
        half = channels // 2

        self.mlp_in = MLP(channels, half, cfg.mlp_hidden, rng)
        self.forward_cell = GRUCell(half, half, rng)
        self.backward_cell = GRUCell(half, half, rng)
        self.mlp_out = MLP(channels, channels, cfg.mlp_hidden, rng, zero_last=True)

    def mix(self, x: Tensor, dates: Optional[np.ndarray]) -> Tensor:
        compressed = self.mlp_in(x)

        forward_states = F.stack(scan(self.forward_cell, compressed), axis=1)
        backward_states = F.stack(
            scan(self.backward_cell, compressed, reverse=True), axis=1
        )

        both = F.concat([forward_states, backward_states], axis=-1)
        return x + self.mlp_out(both)


def build_temporal(
    cfg: TemporalConnConfig, channels: int, rng: np.random.Generator
) -> TemporalConnection:
    """
    Create the temporal connection of the configured kind.
    """

    kinds = {
        TemporalKind.CONV: TemporalConv,
        TemporalKind.LTAE: TemporalAttention,
        TemporalKind.GRU: TemporalGRU,
    }

    logging.debug(
        "Building %s temporal connection with %d channels", cfg.kind.value, channels
    )
    return kinds[cfg.kind](cfg, channels, rng)
