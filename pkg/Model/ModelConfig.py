from typing import Iterable, List, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from util.FAConfException import ConfigException

# Module switches of the ablation study, in table order.
ABLATION_SWITCHES: Tuple[str, ...] = ("band_attention", "multiscale", "emg", "icscm")
# Every switch `ablate` accepts.
ALL_SWITCHES: Tuple[str, ...] = ABLATION_SWITCHES + ("se",)


class ModelConfig(BaseModel):
    """
    Architecture hyperparameters of the FAConformer.

    The five module switches at the bottom are normally set through `ablate`;
    with a switch off the module is replaced as follows:
        band_attention: band weights frozen uniform, channel attention is the identity
        multiscale: one conv branch with kernel S2 and fuse_filters outputs, no merge
        emg: the fuse module sees EEG features only
        icscm: standard (cross-channel) strided conv instead of depthwise
        se: no channel gating
    """
    model_config = ConfigDict(extra="forbid")

    n_bands: int = Field(9, ge=1, description="Filter-bank bands N_b")
    eeg_channels: int = Field(60, ge=1, description="EEG channels C")
    emg_channels: int = Field(6, ge=1, description="EMG channels")
    time_points: int = Field(1000, ge=1, description="Samples per trial after decimation")
    kernel_sizes: List[int] = Field(default_factory=lambda: [15, 31, 63, 125],
                                    description="Multiscale kernel sizes S1..S4, odd")
    fuse_filters: int = Field(128, ge=4, description="Multiscale merge width C_f")
    icscm_stride: int = Field(4, ge=1, description="ICSCM temporal stride")
    icscm_kernel: int = Field(11, ge=1, description="ICSCM kernel size, odd")
    se_reduction_ratio: int = Field(8, ge=1, description="SE reduction ratio r")
    attn_heads: int = Field(4, ge=1, description="Fuse-module attention heads")
    attn_dim: int = Field(32, ge=1, description="Projection width per attention head")
    emg_blocks: int = Field(2, ge=1, description="EMG residual blocks")
    emg_filters: int = Field(16, ge=1, description="EMG branch width C_g")
    emg_kernel: int = Field(7, ge=1, description="EMG residual conv kernel size, odd")
    dropout_p: float = Field(0.25, ge=0.0, lt=1.0, description="Dropout probability")
    n_classes: int = Field(3, ge=2, description="Output classes")
    share_band_attention: bool = Field(True, description="One channel-attention projection set for all bands")

    band_attention: bool = Field(True, description="Frequency band attention enabled")
    multiscale: bool = Field(True, description="Four-scale convolution enabled")
    emg: bool = Field(True, description="EMG branch enabled")
    icscm: bool = Field(True, description="Depthwise ICSCM enabled")
    se: bool = Field(True, description="SE gating enabled")

    @field_validator("kernel_sizes")
    @classmethod
    def _four_odd_kernels(cls, value: List[int]) -> List[int]:
        if len(value) != 4:
            raise ValueError(f"need exactly four kernel sizes, got {len(value)}")
        if any(k < 1 or k % 2 == 0 for k in value):
            raise ValueError(f"kernel sizes must be positive and odd, got {value}")
        return value

    @model_validator(mode="after")
    def _divisibility(self) -> "ModelConfig":
        if self.fuse_filters % 4 != 0:
            raise ValueError(f"fuse_filters {self.fuse_filters} must be divisible by 4")
        if self.fuse_filters % self.attn_heads != 0:
            raise ValueError(f"fuse_filters {self.fuse_filters} must be divisible by attn_heads {self.attn_heads}")
        if self.fuse_filters % self.se_reduction_ratio != 0:
            raise ValueError(f"se_reduction_ratio {self.se_reduction_ratio} must divide fuse_filters {self.fuse_filters}")
        if self.icscm_kernel % 2 == 0 or self.emg_kernel % 2 == 0:
            raise ValueError("icscm_kernel and emg_kernel must be odd")
        if self.time_points % self.icscm_stride != 0:
            raise ValueError(f"time_points {self.time_points} must be divisible by icscm_stride {self.icscm_stride}")
        return self

    @property
    def fused_time_points(self) -> int:
        """Temporal length T_f after ICSCM."""
        return self.time_points // self.icscm_stride

    @property
    def fuse_tokens(self) -> int:
        return self.fuse_filters + (self.emg_filters if self.emg else 0)

    def disabled(self) -> List[str]:
        return [name for name in ALL_SWITCHES if not getattr(self, name)]

    def variant_name(self) -> str:
        off = self.disabled()
        return "full" if not off else "-" + "-".join(off)

    def ablate(self, disable: Iterable[str]) -> "ModelConfig":
        return ablate(self, disable)

    @classmethod
    def tiny(cls, **overrides) -> "ModelConfig":
        """Small network for gradient checks and desk-scale training runs."""
        values = dict(n_bands=2, eeg_channels=3, emg_channels=2, time_points=64,
                      kernel_sizes=[3, 5, 7, 9], fuse_filters=16, icscm_stride=4, icscm_kernel=5,
                      se_reduction_ratio=4, attn_heads=2, attn_dim=4, emg_blocks=2, emg_filters=4,
                      emg_kernel=7, dropout_p=0.1, n_classes=3)
        values.update(overrides)
        return cls(**values)


def ablate(config: ModelConfig, disable: Iterable[str]) -> ModelConfig:
    """
    Copy of `config` with the named modules switched off. Switches compose.

    Raises:
        ConfigException: For an unknown module name.
    """
    disable = list(disable)
    unknown = [name for name in disable if name not in ALL_SWITCHES]
    if unknown:
        raise ConfigException(f"unknown ablation {unknown}, expected names from {list(ALL_SWITCHES)}")
    return config.model_copy(update={name: False for name in disable})


def parse_variant(text: str) -> List[str]:
    """'band_attention+emg' -> ['band_attention', 'emg']; 'full' or '' -> []."""
    text = text.strip()
    if text in ("", "full"):
        return []
    return [part.strip() for part in text.split("+") if part.strip()]
