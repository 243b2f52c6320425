from typing import List

from Model.ModelConfig import ModelConfig
from Model.ModelParams import ModelParams, ParamSpec, conv_specs
from TensorCore import TensorOps as ops
from TensorCore.Tensor import Tensor, ArrayLike
from util.FAConfException import ShapeException


def multiscale_specs(config: ModelConfig) -> List[ParamSpec]:
    c, f = config.eeg_channels, config.fuse_filters
    if not config.multiscale:
        return conv_specs("multiscale.single", f, c, config.kernel_sizes[1])
    specs = []
    for k, size in enumerate(config.kernel_sizes):
        specs += conv_specs(f"multiscale.branch{k}", f // 4, c, size)
    return specs + conv_specs("multiscale.merge", f, f, 1)


def multiscale_fusion(x_fs: ArrayLike, params: ModelParams, config: ModelConfig) -> Tensor:
    """
    Four parallel `same` convolutions with kernels S1..S4 and fuse_filters/4
    outputs each, ELU, channel concat, 1x1 merge to fuse_filters, ELU.
    With multiscale off a single S2 branch produces all fuse_filters channels.

    Args:
        x_fs: [C, T] or [B, C, T].

    Returns:
        Tensor: [fuse_filters, T] or [B, fuse_filters, T].

    Raises:
        ShapeException: If T is shorter than the largest kernel in use.
    """
    x_fs, added = ops.ensure_batch(x_fs, 2)
    kernels = config.kernel_sizes if config.multiscale else [config.kernel_sizes[1]]
    if x_fs.shape[-1] < max(kernels):
        raise ShapeException(f"time axis shorter than multiscale kernel {max(kernels)}", x_fs.shape)

    if not config.multiscale:
        out = ops.elu(ops.conv1d(x_fs, params["multiscale.single.weight"], params["multiscale.single.bias"],
                                 padding="same"))
        return ops.drop_batch(out, added)

    branches = [ops.elu(ops.conv1d(x_fs, params[f"multiscale.branch{k}.weight"],
                                   params[f"multiscale.branch{k}.bias"], padding="same"))
                for k in range(len(config.kernel_sizes))]
    merged = ops.conv1d(ops.concat(branches, axis=-2), params["multiscale.merge.weight"],
                        params["multiscale.merge.bias"], padding="valid")
    return ops.drop_batch(ops.elu(merged), added)
