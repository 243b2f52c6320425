from typing import List

from Model.ModelConfig import ModelConfig
from Model.ModelParams import ModelParams, ParamSpec, conv_specs
from TensorCore import TensorOps as ops
from TensorCore.Tensor import Tensor, ArrayLike
from util.FAConfException import ShapeException


def icscm_specs(config: ModelConfig) -> List[ParamSpec]:
    f, kernel = config.fuse_filters, config.icscm_kernel
    return conv_specs("icscm", f, 1 if config.icscm else f, kernel)


def icscm(x: ArrayLike, params: ModelParams, config: ModelConfig) -> Tensor:
    """
    Independent channel-specific convolution: a strided depthwise `same` conv
    (each channel sees only its own kernel) followed by ELU. With the module
    ablated the kernel mixes all channels at the same stride.

    Args:
        x: [fuse_filters, T] or [B, fuse_filters, T].

    Returns:
        Tensor: [..., fuse_filters, T / icscm_stride].

    Raises:
        ShapeException: If T is not divisible by the stride.
    """
    x, added = ops.ensure_batch(x, 2)
    if x.shape[-1] % config.icscm_stride != 0:
        raise ShapeException(f"time axis not divisible by icscm_stride {config.icscm_stride}", x.shape)
    groups = config.fuse_filters if config.icscm else 1
    out = ops.conv1d(x, params["icscm.weight"], params["icscm.bias"], padding="same",
                     stride=config.icscm_stride, groups=groups)
    return ops.drop_batch(ops.elu(out), added)
