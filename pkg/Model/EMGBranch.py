from typing import List

from Model.ModelConfig import ModelConfig
from Model.ModelParams import ModelParams, ParamSpec, conv_specs
from TensorCore import TensorOps as ops
from TensorCore.Tensor import Tensor, ArrayLike
from util.FAConfException import ShapeException, ConfigException


def block_inputs(config: ModelConfig, block: int) -> int:
    return config.emg_channels if block == 0 else config.emg_filters


def emg_branch_specs(config: ModelConfig) -> List[ParamSpec]:
    if not config.emg:
        return []
    g, kernel = config.emg_filters, config.emg_kernel
    specs = []
    for b in range(config.emg_blocks):
        c_in = block_inputs(config, b)
        specs += conv_specs(f"emg.block{b}.conv1", g, c_in, kernel)
        specs += conv_specs(f"emg.block{b}.conv2", g, g, kernel)
        if c_in != g:
            specs += conv_specs(f"emg.block{b}.skip", g, c_in, 1)
    return specs


def residual_block(x: Tensor, params: ModelParams, prefix: str) -> Tensor:
    """conv -> ELU -> conv, plus the (1x1-projected when widths differ) input, then ELU."""
    h = ops.elu(ops.conv1d(x, params[f"{prefix}.conv1.weight"], params[f"{prefix}.conv1.bias"], padding="same"))
    h = ops.conv1d(h, params[f"{prefix}.conv2.weight"], params[f"{prefix}.conv2.bias"], padding="same")
    if f"{prefix}.skip.weight" in params:
        skip = ops.conv1d(x, params[f"{prefix}.skip.weight"], params[f"{prefix}.skip.bias"], padding="valid")
    else:
        skip = x
    return ops.elu(h + skip)


def emg_branch(x_emg: ArrayLike, params: ModelParams, config: ModelConfig) -> Tensor:
    """
    Residual 1D conv encoder for EMG, average-pooled by icscm_stride so its
    temporal length matches the EEG features.

    Args:
        x_emg: [emg_channels, T] or [B, emg_channels, T].

    Returns:
        Tensor: [..., emg_filters, T / icscm_stride].

    Raises:
        ConfigException: If the branch is disabled or the channel count is off.
        ShapeException: If T does not pool evenly to T_f.
    """
    if not config.emg:
        raise ConfigException("emg branch is disabled in this configuration")
    x, added = ops.ensure_batch(x_emg, 2)
    if x.shape[-2] != config.emg_channels:
        raise ConfigException(f"emg input has {x.shape[-2]} channels, config expects {config.emg_channels}")
    if x.shape[-1] % config.icscm_stride != 0:
        raise ShapeException(f"emg time axis cannot pool by {config.icscm_stride} to the EEG length", x.shape)
    for b in range(config.emg_blocks):
        x = residual_block(x, params, f"emg.block{b}")
    return ops.drop_batch(ops.avg_pool_time(x, config.icscm_stride), added)
