from typing import Union

import numpy as np
from scipy import signal

from FilterBank.BandSpec import SosCascade
from TensorCore.Tensor import Tensor
from util.FAConfException import ShapeException, DomainException


def pad_length(cascade: SosCascade) -> int:
    """Odd-extension length used at both ends of the signal."""
    return 3 * max(2 * cascade.n_sections, 24)


def filtfilt(x: Union[Tensor, np.ndarray], cascade: SosCascade) -> Union[Tensor, np.ndarray]:
    """
    Zero-phase filtering along the last axis: forward pass, reverse, second pass,
    reverse. The magnitude response is squared and the phase cancels.

    Args:
        x: Signal [T] or any [..., T]; a Tensor in gives a (constant) Tensor out.
        cascade: The filter.

    Raises:
        ShapeException: If T does not exceed the padding length.
        DomainException: If the signal holds NaN or Inf.
    """
    data = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    if data.ndim == 0:
        raise ShapeException("filtfilt needs a time axis", data.shape)
    padlen = pad_length(cascade)
    if data.shape[-1] <= padlen:
        raise ShapeException(f"signal of {data.shape[-1]} samples is too short for "
                             f"zero-phase padding of {padlen} samples", data.shape)
    if not np.all(np.isfinite(data)):
        raise DomainException("filtfilt input holds non-finite samples")
    # scipy's compiled sosfilt cannot take the read-only sections buffer, so hand it a copy
    filtered = signal.sosfiltfilt(np.array(cascade.sections), data, axis=-1, padtype="odd", padlen=padlen)
    return Tensor(filtered) if isinstance(x, Tensor) else filtered
