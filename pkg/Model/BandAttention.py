"""Frequency band attention: channel self-attention inside each band, then a
learned convex weighting across bands."""
import math
from typing import List, Optional, TYPE_CHECKING

import numpy as np

from Model.ModelConfig import ModelConfig
from Model.ModelParams import ModelParams, ParamSpec, weight, zeros
from TensorCore import TensorOps as ops
from TensorCore.Tensor import Tensor, ArrayLike
from util.FAConfException import ConfigException, ShapeException

if TYPE_CHECKING:
    from Model.FAConformer import ForwardTrace


def band_attention_specs(config: ModelConfig) -> List[ParamSpec]:
    if not config.band_attention:
        return []
    t, d = config.time_points, config.attn_dim
    lead = () if config.share_band_attention else (config.n_bands,)
    return [
        zeros("band.logits", (config.n_bands,)),
        weight("band_attn.wq", lead + (t, d), t),
        weight("band_attn.wk", lead + (t, d), t),
        weight("band_attn.wv", lead + (t, d), t),
        weight("band_attn.wo", lead + (d, t), d),
    ]


def band_logits(params: ModelParams, config: ModelConfig) -> Tensor:
    """Learned logits, or frozen zeros (uniform weights) with band attention off."""
    if config.band_attention:
        return params["band.logits"]
    return Tensor(np.zeros(config.n_bands))


def band_channel_attention(x_mb: ArrayLike, params: ModelParams, config: ModelConfig,
                           trace: Optional["ForwardTrace"] = None) -> Tensor:
    """
    Single-head scaled dot-product self-attention per band. Tokens are the C
    channels, features their T samples projected to attn_dim; the attended
    values are projected back to T and added to the input.

    Args:
        x_mb: [N_b, C, T] or [B, N_b, C, T].

    Raises:
        ConfigException: If the input does not match the configured shape.
    """
    x_mb, added = ops.ensure_batch(x_mb, 3)
    expected = (config.n_bands, config.eeg_channels, config.time_points)
    if tuple(x_mb.shape[1:]) != expected:
        raise ConfigException(f"band attention input {tuple(x_mb.shape[1:])} does not match config {expected}")
    if not config.band_attention:
        return ops.drop_batch(x_mb, added)

    q = x_mb @ params["band_attn.wq"]
    k = x_mb @ params["band_attn.wk"]
    v = x_mb @ params["band_attn.wv"]
    scores = (q @ ops.swap_last(k)) * (1.0 / math.sqrt(config.attn_dim))
    attention = ops.softmax(scores, axis=-1)
    if trace is not None:
        trace.attention["band"] = attention.data
    out = x_mb + (attention @ v) @ params["band_attn.wo"]
    return ops.drop_batch(out, added)


def band_fuse(x_mb: ArrayLike, logits: ArrayLike, trace: Optional["ForwardTrace"] = None) -> Tensor:
    """
    X_FS = sum_n w(n) X_MB(n) with w = softmax(logits).

    Args:
        x_mb: [N_b, C, T] or [B, N_b, C, T].
        logits: [N_b].

    Returns:
        Tensor: [C, T] or [B, C, T].
    """
    x_mb = ops.as_tensor(x_mb)
    logits = ops.as_tensor(logits)
    if x_mb.ndim < 3 or logits.shape != (x_mb.shape[-3],):
        raise ShapeException("band logits must have one entry per band", logits.shape, x_mb.shape)
    weights = ops.softmax(logits, axis=0)
    if trace is not None:
        trace.band_weights = weights.data
    weighted = x_mb * ops.reshape(weights, (logits.shape[0], 1, 1))
    return ops.reduce_sum(weighted, axis=-3)
