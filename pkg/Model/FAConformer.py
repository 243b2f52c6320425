from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from FilterBank.FilterBank import FilterBank, split_bands
from Model.BandAttention import band_channel_attention, band_fuse, band_logits
from Model.EMGBranch import emg_branch, block_inputs
from Model.FuseModule import BranchFeatures, fuse_module
from Model.ICSCM import icscm
from Model.ModelConfig import ModelConfig
from Model.ModelParams import ModelParams
from Model.MultiScale import multiscale_fusion
from Model.SEBlock import se_block
from TensorCore import TensorOps as ops
from TensorCore.RngState import RngState
from TensorCore.Tensor import Tensor, ArrayLike
from faconf_logging import logger
from util.FAConfException import ConfigException, ShapeException

Denoiser = Callable[[np.ndarray], np.ndarray]


class ForwardTrace(BaseModel):
    """
    Intermediate values recorded by one forward pass.

    Attributes:
        attention: 'band' -> [B, N_b, C, C], 'fuse' -> [B, heads, tokens, tokens].
        band_weights: softmax of the band logits, [N_b].
        se_gate: [B, C_f], absent with SE off.
        pooled: fuse-module output mean-pooled over time, [B, tokens].
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    attention: Dict[str, np.ndarray] = Field(default_factory=dict)
    band_weights: Optional[np.ndarray] = None
    se_gate: Optional[np.ndarray] = None
    pooled: Optional[np.ndarray] = None


def passthrough_denoise(eeg: np.ndarray) -> np.ndarray:
    """Denoising stage hook; an external EEG denoiser replaces this."""
    return eeg


def prepare_eeg(trials: np.ndarray, bank: FilterBank, denoise: Denoiser = passthrough_denoise) -> np.ndarray:
    """
    Denoise, then band-split raw EEG trials once.

    Args:
        trials: [n, C, T].

    Returns:
        np.ndarray: X_MB for every trial, [n, N_b, C, T].
    """
    trials = np.asarray(trials, dtype=np.float64)
    if trials.ndim != 3:
        raise ShapeException("prepare_eeg expects [n_trials, C, T]", trials.shape)
    if trials.shape[0] == 0:
        return np.zeros((0, bank.n_bands) + trials.shape[1:])
    return split_bands(denoise(trials), bank).data


def _check_inputs(x_mb: Tensor, emg: Optional[Tensor], config: ModelConfig) -> None:
    expected = (config.n_bands, config.eeg_channels, config.time_points)
    if x_mb.ndim != 4 or tuple(x_mb.shape[1:]) != expected:
        raise ConfigException(f"multiband EEG {tuple(x_mb.shape)} does not match config [B, *{expected}]")
    if config.emg:
        if emg is None:
            raise ConfigException("EMG input required with the EMG branch enabled")
        if emg.shape != (x_mb.shape[0], config.emg_channels, config.time_points):
            raise ConfigException(f"EMG {tuple(emg.shape)} does not match config "
                                  f"[{x_mb.shape[0]}, {config.emg_channels}, {config.time_points}]")


def forward_batch(x_mb: ArrayLike, emg: Optional[ArrayLike], config: ModelConfig, params: ModelParams,
                  rng: Optional[RngState] = None, training: bool = False,
                  trace: Optional[ForwardTrace] = None) -> Tensor:
    """
    Logits for a batch of band-split trials.

    EEG side: band channel attention, band fuse, multiscale fusion, dropout,
    ICSCM, SE. EMG side: residual branch, dropout. Then the fuse module,
    temporal mean-pool, dropout and the linear classifier.

    Args:
        x_mb: [B, N_b, C, T] multiband EEG.
        emg: [B, emg_channels, T], ignored with the EMG branch off.
        rng: Dropout stream, needed when training.
        training: Dropout active.
        trace: Filled with attention matrices, band weights, SE gate and pooled features.

    Returns:
        Tensor: [B, n_classes].
    """
    x_mb = ops.as_tensor(x_mb)
    emg = ops.as_tensor(emg) if emg is not None else None
    _check_inputs(x_mb, emg, config)
    p = config.dropout_p

    eeg = band_channel_attention(x_mb, params, config, trace)
    eeg = band_fuse(eeg, band_logits(params, config), trace)
    eeg = ops.dropout(multiscale_fusion(eeg, params, config), p, rng, training)
    eeg = se_block(icscm(eeg, params, config), params, config, trace)

    emg_features = None
    if config.emg:
        emg_features = ops.dropout(emg_branch(emg, params, config), p, rng, training)

    fused = fuse_module(BranchFeatures(eeg=eeg, emg=emg_features), params, config, trace)
    pooled = ops.mean_pool_time(fused)
    if trace is not None:
        trace.pooled = pooled.data
    pooled = ops.dropout(pooled, p, rng, training)
    return pooled @ ops.swap_last(params["head.weight"]) + params["head.bias"]


def forward(eeg: ArrayLike, emg: Optional[ArrayLike], config: ModelConfig, params: ModelParams,
            bank: FilterBank, rng: Optional[RngState] = None, training: bool = False) -> Tensor:
    """
    Logits [n_classes] for one raw trial: eeg [C, T], emg [emg_channels, T].
    """
    if bank.n_bands != config.n_bands:
        raise ConfigException(f"filter bank has {bank.n_bands} bands, config expects {config.n_bands}")
    x_mb = split_bands(eeg, bank)
    x_mb = ops.reshape(x_mb, (1,) + x_mb.shape)
    emg = ops.reshape(ops.as_tensor(emg), (1,) + ops.as_tensor(emg).shape) if emg is not None else None
    logits = forward_batch(x_mb, emg, config, params, rng, training)
    return ops.reshape(logits, (config.n_classes,))


def param_count(config: ModelConfig) -> int:
    """Closed-form count of trainable scalars."""
    n_b, c, t, d = config.n_bands, config.eeg_channels, config.time_points, config.attn_dim
    f, g, t_f = config.fuse_filters, config.emg_filters, config.fused_time_points
    count = 0
    if config.band_attention:
        count += n_b + (1 if config.share_band_attention else n_b) * 4 * t * d
    if config.multiscale:
        count += sum((f // 4) * c * s + f // 4 for s in config.kernel_sizes) + f * f + f
    else:
        count += f * c * config.kernel_sizes[1] + f
    count += (f if config.icscm else f * f) * config.icscm_kernel + f
    if config.se:
        count += 2 * f * (f // config.se_reduction_ratio)
    if config.emg:
        k = config.emg_kernel
        for b in range(config.emg_blocks):
            c_in = block_inputs(config, b)
            count += g * c_in * k + g + g * g * k + g
            if c_in != g:
                count += g * c_in + g
    count += 4 * t_f * config.attn_heads * d
    count += config.n_classes * config.fuse_tokens + config.n_classes
    return count


def evaluate_batches(x_mb: np.ndarray, emg: Optional[np.ndarray], config: ModelConfig, params: ModelParams,
                     batch_size: int = 100) -> Tuple[np.ndarray, np.ndarray]:
    """
    Evaluation-mode pass over prepared trials without gradient tracking.

    Returns:
        (np.ndarray, np.ndarray): Logits [n, n_classes] and pooled features [n, tokens].
    """
    frozen = params.detached()
    logits: List[np.ndarray] = []
    pooled: List[np.ndarray] = []
    for start in range(0, x_mb.shape[0], batch_size):
        trace = ForwardTrace()
        stop = start + batch_size
        out = forward_batch(x_mb[start:stop], emg[start:stop] if config.emg else None,
                            config, frozen, training=False, trace=trace)
        logits.append(out.data)
        pooled.append(trace.pooled)
    if not logits:
        return np.zeros((0, config.n_classes)), np.zeros((0, config.fuse_tokens))
    return np.concatenate(logits), np.concatenate(pooled)


class FAConformer:
    """
    A configured network with its parameters and filter bank. Holds the
    evaluation entry points used by training and the CLI.
    """

    def __init__(self, config: ModelConfig, params: ModelParams, bank: FilterBank) -> None:
        if bank.n_bands != config.n_bands:
            raise ConfigException(f"filter bank has {bank.n_bands} bands, config expects {config.n_bands}")
        self.config = config
        self.params = params
        self.bank = bank

    @classmethod
    def create(cls, config: ModelConfig, bank: FilterBank, rng: RngState) -> "FAConformer":
        params = ModelParams.init(config, rng)
        logger.debug(f"FAConformer {config.variant_name()} with {params.count()} parameters")
        return cls(config, params, bank)

    def __repr__(self) -> str:
        return f"FAConformer({self.config.variant_name()}, params={self.params.count()})"

    def forward(self, eeg: ArrayLike, emg: Optional[ArrayLike], rng: Optional[RngState] = None,
                training: bool = False) -> Tensor:
        return forward(eeg, emg, self.config, self.params, self.bank, rng, training)

    def evaluate(self, x_mb: np.ndarray, emg: np.ndarray, batch_size: int = 100) -> Tuple[np.ndarray, np.ndarray]:
        return evaluate_batches(x_mb, emg, self.config, self.params, batch_size)

    def predict(self, x_mb: np.ndarray, emg: np.ndarray, batch_size: int = 100) -> np.ndarray:
        logits, _ = self.evaluate(x_mb, emg, batch_size)
        return np.argmax(logits, axis=1).astype(np.int64)
