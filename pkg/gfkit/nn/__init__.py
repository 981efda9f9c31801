# flake8: noqa
from gfkit.nn.accounting import (
    REFERENCE_COSTS,
    added_temporal_params,
    cost_table,
    flops_estimate,
    normalized_gflops,
    param_count,
)
from gfkit.nn.module import Module, ModuleList, Parameter
from gfkit.nn.network import ModelConfig, Network, crop_for_eval
from gfkit.nn.temporal import (
    TemporalAttention,
    TemporalConnConfig,
    TemporalConv,
    TemporalGRU,
    TemporalKind,
    build_temporal,
)
