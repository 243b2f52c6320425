from typing import List, Optional, TYPE_CHECKING

from Model.ModelConfig import ModelConfig
from Model.ModelParams import ModelParams, ParamSpec, weight
from TensorCore import TensorOps as ops
from TensorCore.Tensor import Tensor, ArrayLike

if TYPE_CHECKING:
    from Model.FAConformer import ForwardTrace


def se_block_specs(config: ModelConfig) -> List[ParamSpec]:
    if not config.se:
        return []
    f = config.fuse_filters
    hidden = f // config.se_reduction_ratio
    return [weight("se.w1", (hidden, f), f), weight("se.w2", (f, hidden), hidden)]


def se_block(x: ArrayLike, params: ModelParams, config: ModelConfig,
             trace: Optional["ForwardTrace"] = None) -> Tensor:
    """
    Squeeze: Z = temporal mean per channel. Excite: gate = sigmoid(w2 sigmoid(w1 Z)).
    The output is the input rescaled channel-wise by the gate.

    Args:
        x: [C_f, T_f] or [B, C_f, T_f].
    """
    x, added = ops.ensure_batch(x, 2)
    if not config.se:
        return ops.drop_batch(x, added)
    squeezed = ops.mean_pool_time(x)
    hidden = ops.sigmoid(squeezed @ ops.swap_last(params["se.w1"]))
    gate = ops.sigmoid(hidden @ ops.swap_last(params["se.w2"]))
    if trace is not None:
        trace.se_gate = gate.data
    out = x * ops.reshape(gate, gate.shape + (1,))
    return ops.drop_batch(out, added)
