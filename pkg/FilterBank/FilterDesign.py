from typing import Sequence

import numpy as np
from scipy import signal

from FilterBank.BandSpec import BandSpec, SosCascade
from faconf_logging import logger
from util.FAConfException import DesignException, DomainException

# Designed attenuation sits this far below the requested bound at the stopband edges.
STOPBAND_MARGIN_DB = 0.1


def _check_stable(cascade: SosCascade, what: str) -> SosCascade:
    if not cascade.is_stable():
        raise DesignException("stability", f"{what} has a pole on or outside the unit circle "
                                           f"(max radius {cascade.pole_radii().max():.6f})")
    return cascade


def design_cheby2_bandpass(spec: BandSpec, fs: float) -> SosCascade:
    """
    Chebyshev type II band-pass as a cascade of second-order sections.

    scipy builds the analog prototype with an equiripple stopband, maps it to a
    band-pass, applies the bilinear transform with pre-warped stopband edges and
    pairs poles/zeros into sections.

    Raises:
        DesignException: If the band does not fit below Nyquist, the lower
            stopband edge would fall at or below 0 Hz, or the result is unstable.
    """
    if fs <= 0:
        raise DesignException("sampling_rate", f"sampling rate must be positive, got {fs}")
    nyquist = fs / 2.0
    stop_low, stop_high = spec.stop_edges_hz
    if spec.high_hz >= nyquist - spec.trans_hz:
        raise DesignException("nyquist", f"band {spec.label()} plus {spec.trans_hz:g} Hz transition "
                                         f"reaches Nyquist {nyquist:g} Hz")
    if stop_low <= 0.0:
        raise DesignException("lower_transition", f"band {spec.label()} with {spec.trans_hz:g} Hz transition "
                                                  f"puts the lower stopband edge at {stop_low:g} Hz")

    sos = signal.cheby2(spec.order, spec.stop_atten_db + STOPBAND_MARGIN_DB, [stop_low, stop_high],
                        btype="bandpass", output="sos", fs=fs)
    cascade = _check_stable(SosCascade(sections=sos, design_fs=fs), f"band {spec.label()}")
    logger.debug(f"Designed {spec.label()} at {fs:g} Hz: {cascade.n_sections} sections, "
                 f"max pole radius {cascade.pole_radii().max():.6f}")
    return cascade


def design_cheby2_lowpass(pass_hz: float, stop_hz: float, fs: float,
                          pass_ripple_db: float = 0.05, stop_atten_db: float = 30.0) -> SosCascade:
    """
    Minimum-order Chebyshev type II low-pass meeting the passband ripple up to
    `pass_hz` and `stop_atten_db` from `stop_hz`.

    Raises:
        DesignException: If the edges are not ordered below Nyquist.
    """
    nyquist = fs / 2.0
    if not 0.0 < pass_hz < stop_hz < nyquist:
        raise DesignException("lowpass_edges", f"need 0 < pass {pass_hz:g} < stop {stop_hz:g} "
                                               f"< Nyquist {nyquist:g} Hz")
    order, natural = signal.cheb2ord(pass_hz, stop_hz, pass_ripple_db, stop_atten_db, fs=fs)
    sos = signal.cheby2(order, stop_atten_db, natural, btype="lowpass", output="sos", fs=fs)
    return _check_stable(SosCascade(sections=sos, design_fs=fs), f"low-pass {pass_hz:g}/{stop_hz:g} Hz")


def frequency_response(cascade: SosCascade, freqs: Sequence[float]) -> np.ndarray:
    """
    Magnitude of the cascade in dB at the given frequencies.

    Raises:
        DomainException: If a frequency lies outside [0, fs/2].
    """
    freqs = np.atleast_1d(np.asarray(freqs, dtype=np.float64))
    nyquist = cascade.design_fs / 2.0
    if np.any(freqs < 0.0) or np.any(freqs > nyquist):
        bad = freqs[(freqs < 0.0) | (freqs > nyquist)][0]
        raise DomainException(f"frequency {bad:g} Hz outside [0, {nyquist:g}] Hz")
    _, response = signal.sosfreqz(cascade.sections, worN=freqs, fs=cascade.design_fs)
    return 20.0 * np.log10(np.maximum(np.abs(response), np.finfo(np.float64).tiny))


def probe_frequencies(fs: float, resolution_hz: float = 0.1) -> np.ndarray:
    """Grid over [0, fs/2] at the given resolution, both ends included."""
    count = int(round((fs / 2.0) / resolution_hz)) + 1
    return np.linspace(0.0, fs / 2.0, count)
