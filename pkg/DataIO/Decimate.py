import numpy as np

from DataIO.TrialSet import TrialSet
from FilterBank.FilterDesign import design_cheby2_lowpass
from FilterBank.ZeroPhase import filtfilt
from faconf_logging import logger
from util.FAConfException import ConfigException, ShapeException

# Anti-alias edges relative to the new sampling rate.
PASS_FRACTION = 0.4
STOP_FRACTION = 0.5


def decimate(trials: TrialSet, factor: int) -> TrialSet:
    """
    Zero-phase Chebyshev-II low-pass (passband to 0.4 x new fs, 30 dB from the
    new Nyquist), then every factor-th sample. Factor 1 returns a copy.

    Raises:
        ConfigException: For factor < 1.
        ShapeException: If T is not divisible by factor.
    """
    if factor < 1:
        raise ConfigException(f"decimation factor must be >= 1, got {factor}")
    if trials.time_points % factor:
        raise ShapeException(f"{trials.time_points} samples per trial are not divisible by {factor}",
                             trials.eeg.shape)
    if factor == 1:
        return trials.model_copy(update={"eeg": trials.eeg.copy(), "emg": trials.emg.copy()})

    new_fs = trials.fs_hz / factor
    cascade = design_cheby2_lowpass(PASS_FRACTION * new_fs, STOP_FRACTION * new_fs, trials.fs_hz)
    logger.debug(f"decimating {trials.fs_hz:g} -> {new_fs:g} Hz with {cascade.n_sections} sections")
    eeg = filtfilt(trials.eeg, cascade)[..., ::factor] if trials.n_trials else trials.eeg[..., ::factor]
    emg = filtfilt(trials.emg, cascade)[..., ::factor] if trials.n_trials else trials.emg[..., ::factor]
    return TrialSet(eeg=np.ascontiguousarray(eeg), emg=np.ascontiguousarray(emg), labels=trials.labels.copy(),
                    fs_hz=new_fs, class_names=list(trials.class_names), subject_id=trials.subject_id)


def decimate_to(trials: TrialSet, target_fs: float) -> TrialSet:
    """
    Raises:
        ConfigException: If the current rate is not an integer multiple of target_fs.
    """
    ratio = trials.fs_hz / target_fs
    factor = int(round(ratio))
    if factor < 1 or abs(ratio - factor) > 1e-9 * ratio:
        raise ConfigException(f"cannot decimate {trials.fs_hz:g} Hz to {target_fs:g} Hz by an integer factor")
    return decimate(trials, factor)
