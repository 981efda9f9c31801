"""
Basic layers shared by the encoder, the decoder and the temporal connections.
"""

from typing import Optional

import numpy as np

from gfkit.autodiff import functional as F
from gfkit.autodiff.tensor import Tensor
from gfkit.exceptions import ConfigurationError
from gfkit.nn import init
from gfkit.nn.module import Module

LINEAR_STD = 0.02


class Linear(Module):
    """
    Affine map over the last axis. The weight is stored as ``(in, out)``.

    :param in_features: Width of the input
    :type in_features: int

    :param out_features: Width of the output
    :type out_features: int

    :param rng: Random generator used for the initial weights
    :type rng: np.random.Generator

    :param zero: Initialize weight and bias with zeros
    :type zero: bool
    """

    def __init__(
        self,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
        bias: bool = True,
        zero: bool = False,
    ) -> None:
        shape = (in_features, out_features)
        self.weight = init.zeros(shape) if zero else init.normal(shape, LINEAR_STD, rng)
        self.bias = init.zeros((out_features,)) if bias else None

    def forward(self, x: Tensor) -> Tensor:  # pylint: disable=arguments-differ
        return F.linear(x, self.weight, self.bias)


class Conv2d(Module):
    """
    Square-kernel convolution of ``(N, C, H, W)`` inputs.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        stride: int = 1,
        padding: Optional[int] = None,
    ) -> None:
        self.stride = stride
        self.padding = kernel_size // 2 if padding is None else padding

        fan_in = in_channels * kernel_size * kernel_size
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        self.weight = init.kaiming(shape, fan_in, rng)
        self.bias = init.zeros((out_channels,))

    def forward(self, x: Tensor) -> Tensor:  # pylint: disable=arguments-differ
        return F.conv2d(
            x, self.weight, self.bias, stride=self.stride, padding=self.padding
        )


class LayerNorm(Module):
    def __init__(self, channels: int, eps: float = 1e-5) -> None:
        self.eps = eps
        self.weight = init.ones((channels,))
        self.bias = init.zeros((channels,))

    def forward(self, x: Tensor) -> Tensor:  # pylint: disable=arguments-differ
        return F.layer_norm(x, self.weight, self.bias, eps=self.eps)


class GroupNorm(Module):
    """
    Group normalization of ``(N, C, ...)`` inputs.

    :raises: ``ConfigurationError`` if ``channels`` is not divisible by ``groups``
    """

    def __init__(self, channels: int, groups: int, eps: float = 1e-5) -> None:
        if groups < 1 or channels % groups:
            raise ConfigurationError(
                f"{channels} channels are not divisible into {groups} groups"
            )

        self.groups = groups
        self.eps = eps
        self.weight = init.ones((channels,))
        self.bias = init.zeros((channels,))

    def forward(self, x: Tensor) -> Tensor:  # pylint: disable=arguments-differ
        return F.group_norm(x, self.weight, self.bias, self.groups, eps=self.eps)


def norm_groups(channels: int, preferred: int = 8) -> int:
    """
    Return the largest group count not above ``preferred`` which divides
    ``channels``. Used by the decoder, whose widths are not always multiples
    of the preferred group count.
    """

    for groups in range(min(preferred, channels), 0, -1):
        if channels % groups == 0:
            return groups

    return 1
