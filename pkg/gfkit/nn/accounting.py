"""
Parameter and compute accounting of network configurations.
"""

from typing import Dict, List, NamedTuple

import numpy as np

from gfkit.nn.init import deferred_init
from gfkit.nn.network import MLP_RATIO, PATCH_SIZE, ModelConfig, Network
from gfkit.nn.temporal import TemporalConnConfig, TemporalKind


class ReferenceCost(NamedTuple):
    parameters_m: float
    gflops: float


# Published costs of the full-size variants; GFLOPs normalized to a single
# 256x256 output of a 512x512 input.
REFERENCE_OUTPUT = 256
REFERENCE_COSTS: Dict[str, ReferenceCost] = {
    "small": ReferenceCost(50.9, 162.9),
    "tiny": ReferenceCost(31.4, 67.2),
    "tiny-conv": ReferenceCost(38.0, 76.5),
    "tiny-ltae": ReferenceCost(34.9, 72.7),
    "tiny-gru": ReferenceCost(41.3, 71.9),
}


def param_count(cfg: ModelConfig) -> int:
    """
    Count the learnable scalars of the network described by ``cfg``. The
    network is built without drawing initial values, so counting full-size
    configurations stays cheap.

    :param cfg: Architecture hyperparameters
    :type cfg: ModelConfig

    :return: Returns the exact number of parameters
    :rtype: int
    """

    with deferred_init():
        model = Network(cfg, np.random.default_rng(0))

    return model.num_parameters()


def added_temporal_params(cfg: ModelConfig) -> int:
    """
    Return how many parameters the temporal connections add to ``cfg``.
    """

    if cfg.temporal is None:
        return 0

    return param_count(cfg) - param_count(cfg.without_temporal())


def _temporal_macs(
    temporal: TemporalConnConfig, positions: int, channels: int, frames: int
) -> float:
    """
    MACs of one temporal connection for a single frame.
    """

    if temporal.kind == TemporalKind.CONV:
        return positions * temporal.kernel_size * channels * channels

    if temporal.kind == TemporalKind.LTAE:
        projections = 3 * channels * channels / temporal.heads
        attention = 2 * frames * channels
        return positions * (projections + attention + channels * channels)

    half = channels // 2
    recurrence = 2 * 2 * 3 * half * half
    return positions * (channels * half + recurrence + channels * channels)


def _conv_macs(
    positions: int, in_channels: int, out_channels: int, kernel: int = 3
) -> float:
    return positions * kernel * kernel * in_channels * out_channels


def stage_macs(cfg: ModelConfig) -> List[float]:
    """
    Per-frame MACs of every encoder stage, in stage order. Decoder and head
    costs are not included.
    """

    channels = cfg.stage_channels()
    costs: List[float] = []

    for stage, resolution in enumerate(cfg.stage_resolutions()):
        positions = resolution * resolution
        width = channels[stage]
        window = cfg.stage_windows()[stage]
        cost = 0.0

        if stage:
            cost += positions * 4 * channels[stage - 1] * width

        block = positions * (
            (4 + 2 * MLP_RATIO) * width * width + 2 * window * window * width
        )
        cost += cfg.depths[stage] * block

        if cfg.has_temporal(stage):
            cost += cfg.depths[stage] * _temporal_macs(
                cfg.temporal, positions, width, cfg.frames
            )

        costs.append(cost)

    return costs


def flops_estimate(cfg: ModelConfig) -> float:
    """
    Analytic multiply-accumulate count of one forward pass, per frame.
    Covers convolutions, linear layers and attention products; normalization
    and activations are ignored. The count is for the configured context and
    is not comparable with ``REFERENCE_COSTS``; see :func:`normalized_gflops`.

    :param cfg: Architecture hyperparameters
    :type cfg: ModelConfig

    :return: Returns the MACs per frame at the configured context
    :rtype: float
    """

    encoder = cfg.stage_channels()
    decoder = cfg.decoder_channels()
    resolutions = cfg.stage_resolutions()

    total = (resolutions[0] ** 2) * PATCH_SIZE * PATCH_SIZE * encoder[0]
    total += sum(stage_macs(cfg))

    for stage in range(cfg.num_stages):
        positions = resolutions[stage] ** 2
        last = stage == cfg.num_stages - 1
        in_channels = encoder[stage] if last else decoder[stage] + encoder[stage]

        if not last:
            total += _conv_macs(positions, decoder[stage + 1], decoder[stage])

        total += _conv_macs(positions, in_channels, decoder[stage])
        total += _conv_macs(positions, decoder[stage], decoder[stage])

        if in_channels != decoder[stage]:
            total += _conv_macs(positions, in_channels, decoder[stage], kernel=1)

        if cfg.has_temporal(stage, decoder=True):
            total += _temporal_macs(cfg.temporal, positions, decoder[stage], cfg.frames)

    half = (cfg.context // 2) ** 2
    full = cfg.context ** 2
    total += _conv_macs(half, decoder[0], decoder[0])
    total += _conv_macs(full, decoder[0], decoder[0])
    total += _conv_macs(full, decoder[0], cfg.num_classes)

    return float(total)


def normalized_gflops(cfg: ModelConfig) -> float:
    """
    Giga multiply-accumulates spent per evaluated ``256x256`` output, the unit
    of ``REFERENCE_COSTS``. A forward pass yields ``eval_crop ** 2`` evaluated
    pixels, so the per-frame count is scaled by ``(256 / eval_crop) ** 2``.
    """

    return flops_estimate(cfg) * (REFERENCE_OUTPUT / cfg.eval_crop) ** 2 / 1e9


class CostRow(NamedTuple):
    variant: str
    parameters: int
    added_parameters: int
    macs: float
    gflops: float
    overhead: float


def cost_table(cfg: ModelConfig) -> List[CostRow]:
    """
    Cost of the configuration without temporal connections and with each
    connection kind, keeping every other setting of ``cfg``.
    """

    base = cfg.without_temporal()
    base_params = param_count(base)
    base_macs = flops_estimate(base)
    template = cfg.temporal or TemporalConnConfig(kind=TemporalKind.CONV)
    frames = max(cfg.frames, 2)

    rows = [
        CostRow("none", base_params, 0, base_macs, normalized_gflops(base), 0.0)
    ]

    for kind in TemporalKind:
        variant = cfg.copy(
            update={"temporal": template.copy(update={"kind": kind}), "frames": frames}
        )
        params = param_count(variant)
        macs = flops_estimate(variant)
        rows.append(
            CostRow(
                kind.value,
                params,
                params - base_params,
                macs,
                normalized_gflops(variant),
                macs / base_macs - 1.0,
            )
        )

    return rows
