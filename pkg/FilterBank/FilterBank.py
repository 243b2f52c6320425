from typing import List, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from FilterBank.BandSpec import BandSpec, SosCascade
from FilterBank.FilterDesign import design_cheby2_bandpass
from FilterBank.ZeroPhase import filtfilt
from TensorCore.Tensor import Tensor
from faconf_config import MODEL_FS_HZ
from faconf_logging import logger
from util.FAConfException import ShapeException, DomainException

# Nine contiguous 4 Hz bands spanning 4-40 Hz.
DEFAULT_BAND_EDGES: List[Tuple[float, float]] = [(float(low), float(low + 4)) for low in range(4, 40, 4)]


class FilterBankConfig(BaseModel):
    """
    Band layout and the filter parameters shared by every band.
    """
    model_config = ConfigDict(extra="forbid")

    band_edges: List[Tuple[float, float]] = Field(default_factory=lambda: list(DEFAULT_BAND_EDGES),
                                                  description="Passband (low, high) pairs in Hz")
    order: int = Field(4, ge=2, description="Chebyshev-II prototype order, even")
    stop_atten_db: float = Field(30.0, gt=0.0, description="Minimum stopband attenuation in dB")
    trans_hz: float = Field(2.0, gt=0.0, description="Transition width in Hz")
    fs_hz: float = Field(MODEL_FS_HZ, gt=0.0, description="Sampling rate the bank is designed for")

    @field_validator("band_edges")
    @classmethod
    def _non_empty(cls, value: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
        if not value:
            raise ValueError("the filter bank needs at least one band")
        return value

    def band_specs(self) -> List[BandSpec]:
        return [BandSpec(low_hz=low, high_hz=high, order=self.order,
                         stop_atten_db=self.stop_atten_db, trans_hz=self.trans_hz)
                for low, high in self.band_edges]

    def build(self) -> "FilterBank":
        return FilterBank.design(self.band_specs(), self.fs_hz)


class FilterBand(BaseModel):
    model_config = ConfigDict(frozen=True)

    spec: BandSpec
    cascade: SosCascade


class FilterBank(BaseModel):
    """
    Ordered band-pass channels. Band n of the multi-band tensor X_MB is the
    zero-phase output of `bands[n].cascade`.
    """
    model_config = ConfigDict(frozen=True)

    bands: List[FilterBand] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _ascending(self) -> "FilterBank":
        lows = [band.spec.low_hz for band in self.bands]
        if any(b < a for a, b in zip(lows, lows[1:])):
            raise ValueError(f"bands must be ordered by ascending low_hz, got {lows}")
        rates = {band.cascade.design_fs for band in self.bands}
        if len(rates) != 1:
            raise ValueError(f"all bands must share one design rate, got {sorted(rates)}")
        return self

    @classmethod
    def design(cls, specs: Sequence[BandSpec], fs: float) -> "FilterBank":
        bands = [FilterBand(spec=spec, cascade=design_cheby2_bandpass(spec, fs)) for spec in specs]
        logger.debug(f"Filter bank of {len(bands)} bands designed at {fs:g} Hz")
        return cls(bands=bands)

    @classmethod
    def default(cls, fs: float = MODEL_FS_HZ) -> "FilterBank":
        return FilterBankConfig(fs_hz=fs).build()

    @property
    def n_bands(self) -> int:
        return len(self.bands)

    @property
    def fs_hz(self) -> float:
        return self.bands[0].cascade.design_fs


def split_bands(trial: Union[Tensor, np.ndarray], bank: FilterBank) -> Tensor:
    """
    Splits a trial into the multi-band tensor X_MB.

    Args:
        trial: [C, T], or a batch [B, C, T].
        bank: The filter bank.

    Returns:
        Tensor: [N_b, C, T], or [B, N_b, C, T] for a batch. Constant (no gradient).

    Raises:
        ShapeException, DomainException: From filtfilt, with the failing band named.
    """
    data = trial.data if isinstance(trial, Tensor) else np.asarray(trial, dtype=np.float64)
    if data.ndim not in (2, 3):
        raise ShapeException("split_bands expects [C, T] or [B, C, T]", data.shape)
    out = np.empty(data.shape[:-2] + (bank.n_bands,) + data.shape[-2:])
    for n, band in enumerate(bank.bands):
        try:
            out[..., n, :, :] = filtfilt(data, band.cascade)
        except ShapeException as e:
            raise ShapeException(f"band {n} ({band.spec.label()}): {e}") from e
        except DomainException as e:
            raise DomainException(f"band {n} ({band.spec.label()}): {e}") from e
    return Tensor(out)
