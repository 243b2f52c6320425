from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class BandSpec(BaseModel):
    """
    One band-pass channel of the filter bank.

    The stopband edges sit `trans_hz` outside the passband edges; the response
    there is at most -stop_atten_db. `order` is the analog low-pass prototype
    order, so the band-pass cascade has `order` second-order sections.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    low_hz: float = Field(..., gt=0.0, description="Passband lower edge in Hz")
    high_hz: float = Field(..., gt=0.0, description="Passband upper edge in Hz")
    order: int = Field(4, ge=2, description="Prototype order, even")
    stop_atten_db: float = Field(30.0, gt=0.0, description="Minimum stopband attenuation in dB")
    trans_hz: float = Field(2.0, gt=0.0, description="Passband edge to stopband edge distance in Hz")

    @field_validator("order")
    @classmethod
    def _order_even(cls, value: int) -> int:
        if value % 2 != 0:
            raise ValueError(f"filter order must be even, got {value}")
        return value

    @model_validator(mode="after")
    def _edges_ordered(self) -> "BandSpec":
        if self.low_hz >= self.high_hz:
            raise ValueError(f"low_hz {self.low_hz} must be below high_hz {self.high_hz}")
        return self

    @property
    def center_hz(self) -> float:
        """Geometric center of the passband."""
        return float(np.sqrt(self.low_hz * self.high_hz))

    @property
    def stop_edges_hz(self) -> List[float]:
        return [self.low_hz - self.trans_hz, self.high_hz + self.trans_hz]

    def label(self) -> str:
        return f"{self.low_hz:g}-{self.high_hz:g}Hz"


class SosCascade(BaseModel):
    """
    Realized filter as second-order sections. Each row is scipy's layout
    (b0, b1, b2, 1, a1, a2), i.e. a0 normalized to one.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    sections: np.ndarray = Field(..., description="[n_sections, 6] section coefficients")
    design_fs: float = Field(..., gt=0.0, description="Sampling rate the cascade was designed for")

    @field_validator("sections")
    @classmethod
    def _sections_shape(cls, value: np.ndarray) -> np.ndarray:
        value = np.array(value, dtype=np.float64)
        if value.ndim != 2 or value.shape[1] != 6 or value.shape[0] < 1:
            raise ValueError(f"sections must be [n, 6], got {value.shape}")
        if not np.allclose(value[:, 3], 1.0):
            raise ValueError("sections must have a0 normalized to 1")
        value.setflags(write=False)
        return value

    @classmethod
    def identity(cls, fs: float) -> "SosCascade":
        return cls(sections=np.array([[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]]), design_fs=fs)

    @property
    def n_sections(self) -> int:
        return int(self.sections.shape[0])

    def pole_radii(self) -> np.ndarray:
        """Magnitudes of the roots of 1 + a1 z^-1 + a2 z^-2 for every section."""
        radii = [np.abs(np.roots([1.0, a1, a2])) for a1, a2 in self.sections[:, 4:6]]
        return np.concatenate(radii) if radii else np.zeros(0)

    def is_stable(self) -> bool:
        return bool(np.all(self.pole_radii() < 1.0))
