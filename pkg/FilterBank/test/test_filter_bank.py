import unittest

import numpy as np
import pytest
from pydantic import ValidationError

from FilterBank.BandSpec import BandSpec, SosCascade
from FilterBank.FilterBank import FilterBank, FilterBankConfig, split_bands, DEFAULT_BAND_EDGES
from FilterBank.FilterDesign import (design_cheby2_bandpass, design_cheby2_lowpass, frequency_response,
                                     probe_frequencies)
from FilterBank.ZeroPhase import filtfilt, pad_length
from TensorCore.RngState import RngState
from TensorCore.Tensor import Tensor
from util.FAConfException import DesignException, DomainException, ShapeException

FS = 250.0


def _sine(freq, n=2500, fs=FS, phase=0.0):
    t = np.arange(n) / fs
    return np.sin(2.0 * np.pi * freq * t + phase)


def _middle(x):
    n = x.shape[-1]
    return x[..., n // 4: 3 * n // 4]


def _alpha_band():
    return design_cheby2_bandpass(BandSpec(low_hz=8.0, high_hz=12.0, order=4, stop_atten_db=30.0, trans_hz=2.0), FS)


class TestBandSpec(unittest.TestCase):

    def test_odd_order_rejected(self):
        with pytest.raises(ValidationError):
            BandSpec(low_hz=8.0, high_hz=12.0, order=3)

    def test_edges_must_be_ordered(self):
        with pytest.raises(ValidationError):
            BandSpec(low_hz=12.0, high_hz=8.0)

    def test_band_beyond_nyquist_names_constraint(self):
        with pytest.raises(DesignException) as info:
            design_cheby2_bandpass(BandSpec(low_hz=120.0, high_hz=124.0), FS)
        assert info.value.constraint == "nyquist"

    def test_lower_stopband_edge_must_be_positive(self):
        with pytest.raises(DesignException) as info:
            design_cheby2_bandpass(BandSpec(low_hz=1.0, high_hz=5.0, trans_hz=2.0), FS)
        assert info.value.constraint == "lower_transition"

    def test_sections_must_be_normalized(self):
        with pytest.raises(ValidationError):
            SosCascade(sections=np.array([[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]]), design_fs=FS)


class TestDesign(unittest.TestCase):

    def test_center_within_one_db(self):
        center = np.sqrt(8.0 * 12.0)
        assert abs(frequency_response(_alpha_band(), [center])[0]) <= 1.0

    def test_stopband_edges_attenuated(self):
        edges = frequency_response(_alpha_band(), [6.0, 14.0])
        assert np.all(edges <= -30.0)

    def test_dc_and_nyquist_rejected(self):
        ends = frequency_response(_alpha_band(), [0.0, FS / 2.0])
        assert np.all(ends <= -30.0)

    def test_prototype_order_gives_order_sections(self):
        assert _alpha_band().n_sections == 4

    def test_equiripple_stopband(self):
        freqs = probe_frequencies(FS)
        response = frequency_response(_alpha_band(), freqs)
        stopband = response[(freqs <= 6.0) | (freqs >= 14.0)]
        assert -31.0 <= stopband.max() <= -30.0

    def test_default_bands_stable_and_within_tolerance(self):
        for fs in (250.0, 2500.0):
            bank = FilterBank.default(fs)
            assert bank.n_bands == 9
            freqs = probe_frequencies(fs)
            for band in bank.bands:
                assert band.cascade.is_stable(), band.spec.label()
                assert band.cascade.pole_radii().max() < 1.0
                assert abs(frequency_response(band.cascade, [band.spec.center_hz])[0]) <= 1.0
                stop_low, stop_high = band.spec.stop_edges_hz
                response = frequency_response(band.cascade, freqs)
                outside = response[(freqs <= stop_low) | (freqs >= stop_high)]
                assert outside.max() <= -30.0, band.spec.label()

    def test_lowpass_meets_edges(self):
        cascade = design_cheby2_lowpass(100.0, 125.0, 2500.0)
        passband, stopband = frequency_response(cascade, [50.0, 100.0]), frequency_response(cascade, [125.0, 400.0])
        assert np.all(np.abs(passband) <= 0.05 + 1e-6)
        assert np.all(stopband <= -30.0 + 1e-6)


class TestFrequencyResponse(unittest.TestCase):

    def test_identity_is_zero_db(self):
        response = frequency_response(SosCascade.identity(FS), probe_frequencies(FS, 1.0))
        np.testing.assert_allclose(response, 0.0, atol=1e-12)

    def test_cascading_doubles_db(self):
        section = _alpha_band().sections[:1]
        freqs = np.linspace(0.5, 124.5, 50)
        once = frequency_response(SosCascade(sections=section, design_fs=FS), freqs)
        twice = frequency_response(SosCascade(sections=np.vstack([section, section]), design_fs=FS), freqs)
        np.testing.assert_allclose(twice, 2.0 * once, rtol=1e-9, atol=1e-8)

    def test_out_of_range_frequency(self):
        with pytest.raises(DomainException):
            frequency_response(_alpha_band(), [10.0, 130.0])
        with pytest.raises(DomainException):
            frequency_response(_alpha_band(), [-1.0])


class TestFiltfilt(unittest.TestCase):

    def test_passband_sine_preserved_with_zero_phase(self):
        x = _sine(10.0)
        y = filtfilt(x, _alpha_band())
        assert np.max(np.abs(_middle(y))) == pytest.approx(1.0, rel=0.05)
        mid = slice(600, 1900)
        lags = list(range(-10, 11))
        xcorr = [np.dot(x[mid], y[mid.start + lag: mid.stop + lag]) for lag in lags]
        assert lags[int(np.argmax(xcorr))] == 0

    def test_stopband_sine_attenuated(self):
        y = filtfilt(_sine(25.0), _alpha_band())
        attenuation_db = -20.0 * np.log10(np.max(np.abs(_middle(y))))
        assert attenuation_db >= 28.0

    def test_zero_in_zero_out(self):
        np.testing.assert_array_equal(filtfilt(np.zeros(500), _alpha_band()), np.zeros(500))

    def test_linearity(self):
        rng = RngState(seed=11)
        x, y = rng.normal(1000), rng.normal(1000)
        cascade = _alpha_band()
        combined = filtfilt(2.5 * x - 0.75 * y, cascade)
        separate = 2.5 * filtfilt(x, cascade) - 0.75 * filtfilt(y, cascade)
        np.testing.assert_allclose(combined, separate, rtol=1e-9, atol=1e-12)

    def test_too_short_for_padding(self):
        cascade = _alpha_band()
        with pytest.raises(ShapeException):
            filtfilt(np.ones(pad_length(cascade)), cascade)

    def test_non_finite_rejected(self):
        x = _sine(10.0)
        x[100] = np.nan
        with pytest.raises(DomainException):
            filtfilt(x, _alpha_band())

    def test_tensor_in_tensor_out(self):
        out = filtfilt(Tensor(_sine(10.0, n=300)), _alpha_band())
        assert isinstance(out, Tensor) and out.shape == (300,)

    def test_tensor_output_is_a_constant(self):
        source = Tensor(_sine(10.0, n=300), requires_grad=True)
        out = filtfilt(source, _alpha_band())
        assert not out.requires_grad
        assert out.op == "leaf"
        assert source.grad is None


class TestSplitBands(unittest.TestCase):

    def test_wide_band_is_near_allpass(self):
        bank = FilterBank.design([BandSpec(low_hz=1.0, high_hz=45.0, order=8, trans_hz=0.5)], FS)
        rng = RngState(seed=5)
        freqs = rng.uniform((2, 40), 2.0, 30.0)
        phases = rng.uniform((2, 40), 0.0, 2.0 * np.pi)
        trial = np.stack([sum(_sine(f, phase=p) for f, p in zip(fr, ph)) for fr, ph in zip(freqs, phases)])
        out = split_bands(trial, bank)
        assert out.shape == (1, 2, 2500)
        for channel in range(2):
            corr = np.corrcoef(_middle(trial[channel]), _middle(out.data[0, channel]))[0, 1]
            assert corr > 0.95

    def test_two_tone_separation(self):
        bank = FilterBankConfig(band_edges=[(8.0, 12.0), (24.0, 28.0)]).build()
        trial = np.stack([_sine(10.0) + _sine(25.0), _sine(10.0, phase=1.0) + _sine(25.0, phase=2.0)])
        out = split_bands(trial, bank).data
        assert out.shape == (2, 2, 2500)
        for channel in range(2):
            assert np.max(np.abs(_middle(out[0, channel]))) == pytest.approx(1.0, rel=0.05)
            assert np.max(np.abs(_middle(out[1, channel]))) == pytest.approx(1.0, rel=0.05)

    def test_non_adjacent_bands_reject_tone(self):
        bank = FilterBank.default(FS)
        tone = _sine(10.0)[None, :]
        out = split_bands(tone, bank).data
        tone_band = next(n for n, b in enumerate(bank.bands) if b.spec.low_hz <= 10.0 <= b.spec.high_hz)
        rms_in = np.sqrt(np.mean(_middle(tone) ** 2))
        for n in range(bank.n_bands):
            if abs(n - tone_band) < 2:
                continue
            rms_out = np.sqrt(np.mean(_middle(out[n]) ** 2))
            assert 20.0 * np.log10(rms_out / rms_in) <= -25.0, bank.bands[n].spec.label()

    def test_zero_trial(self):
        out = split_bands(np.zeros((3, 400)), FilterBank.default(FS))
        np.testing.assert_array_equal(out.data, np.zeros((9, 3, 400)))

    def test_batch_matches_single_trials(self):
        bank = FilterBankConfig(band_edges=[(8.0, 12.0), (16.0, 20.0)]).build()
        batch = RngState(seed=2).normal((3, 2, 300))
        stacked = np.stack([split_bands(trial, bank).data for trial in batch])
        np.testing.assert_allclose(split_bands(batch, bank).data, stacked, rtol=1e-12, atol=1e-12)

    def test_short_trial_names_band(self):
        with pytest.raises(ShapeException) as info:
            split_bands(np.zeros((2, 50)), FilterBank.default(FS))
        assert "band 0" in str(info.value)

    def test_bank_rejects_unordered_bands(self):
        bands = FilterBank.default(FS).bands
        with pytest.raises(ValidationError):
            FilterBank(bands=[bands[1], bands[0]])

    def test_default_layout(self):
        assert DEFAULT_BAND_EDGES[0] == (4.0, 8.0) and DEFAULT_BAND_EDGES[-1] == (36.0, 40.0)
