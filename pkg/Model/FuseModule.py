import math
from typing import List, Optional, TYPE_CHECKING

from pydantic import BaseModel, ConfigDict, Field, model_validator

from Model.ModelConfig import ModelConfig
from Model.ModelParams import ModelParams, ParamSpec, weight
from TensorCore import TensorOps as ops
from TensorCore.Tensor import Tensor
from util.FAConfException import ShapeException

if TYPE_CHECKING:
    from Model.FAConformer import ForwardTrace


class BranchFeatures(BaseModel):
    """
    Outputs of the two encoders, batched: eeg [B, C_f, T_f], emg [B, C_g, T_f]
    or None when the EMG branch is ablated.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    eeg: Tensor = Field(..., description="EEG features X_eeg")
    emg: Optional[Tensor] = Field(None, description="EMG features X_emg")

    @model_validator(mode="after")
    def _same_length(self) -> "BranchFeatures":
        if self.emg is not None and (self.emg.shape[0] != self.eeg.shape[0] or self.emg.shape[-1] != self.eeg.shape[-1]):
            raise ShapeException("EEG and EMG features disagree on batch or temporal length",
                                 self.eeg.shape, self.emg.shape)
        return self

    def concat(self) -> Tensor:
        """Concat(X_emg, X_eeg) along the channel axis."""
        return self.eeg if self.emg is None else ops.concat([self.emg, self.eeg], axis=-2)


def fuse_module_specs(config: ModelConfig) -> List[ParamSpec]:
    t_f, width = config.fused_time_points, config.attn_heads * config.attn_dim
    return [
        weight("fuse.wq", (t_f, width), t_f),
        weight("fuse.wk", (t_f, width), t_f),
        weight("fuse.wv", (t_f, width), t_f),
        weight("fuse.wo", (width, t_f), width),
    ]


def _split_heads(x: Tensor, heads: int, dim: int) -> Tensor:
    """[B, N, H*d] -> [B, H, N, d]"""
    batch, tokens, _ = x.shape
    return ops.transpose(ops.reshape(x, (batch, tokens, heads, dim)), (0, 2, 1, 3))


def fuse_module(features: BranchFeatures, params: ModelParams, config: ModelConfig,
                trace: Optional["ForwardTrace"] = None) -> Tensor:
    """
    Channel concat followed by multihead self-attention over channels. Each
    head projects the T_f series of every channel to attn_dim; head outputs
    are concatenated, projected back to T_f and added to the concat.

    Returns:
        Tensor: [B, tokens, T_f] with tokens = C_g + C_f (C_f without EMG).
    """
    x = features.concat()
    if x.ndim != 3 or x.shape[-1] != config.fused_time_points:
        raise ShapeException(f"fuse module expects [B, tokens, {config.fused_time_points}]", x.shape)
    heads, dim = config.attn_heads, config.attn_dim
    batch, tokens, _ = x.shape

    q = _split_heads(x @ params["fuse.wq"], heads, dim)
    k = _split_heads(x @ params["fuse.wk"], heads, dim)
    v = _split_heads(x @ params["fuse.wv"], heads, dim)
    attention = ops.softmax((q @ ops.swap_last(k)) * (1.0 / math.sqrt(dim)), axis=-1)
    if trace is not None:
        trace.attention["fuse"] = attention.data
    heads_out = ops.reshape(ops.transpose(attention @ v, (0, 2, 1, 3)), (batch, tokens, heads * dim))
    return x + heads_out @ params["fuse.wo"]
