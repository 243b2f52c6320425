import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from DataIO.TrialSet import TrialSet, default_class_names
from TensorCore.RngState import RngState
from faconf_config import MODEL_FS_HZ


class SynthConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_trials: int = Field(300, ge=1, description="Trials in the set")
    n_classes: int = Field(3, ge=1, description="Balanced classes")
    eeg_channels: int = Field(8, ge=1, description="EEG channels")
    emg_channels: int = Field(2, ge=1, description="EMG channels")
    time_points: int = Field(1000, ge=1, description="Samples per trial (4 s at 250 Hz)")
    fs_hz: float = Field(MODEL_FS_HZ, gt=0.0, description="Sampling rate")
    seed: int = Field(7, ge=0, lt=2 ** 64, description="Generator seed")
    snr: float = Field(10.0, gt=0.0, description="Tone power over noise power; inf for no noise")


def class_tone_hz(label: int) -> float:
    return 8.0 + 4.0 * label


def make_synthetic(cfg: SynthConfig) -> TrialSet:
    """
    Separable toy trials. Class c puts a unit sine at 8 + 4c Hz (random phase)
    on the EEG channels i with i % n_classes == c, and a Gaussian burst whose
    center moves with c on every EMG channel. White noise of variance
    0.5 / snr is added to every channel. Labels are balanced and shuffled.
    """
    rng = RngState(seed=cfg.seed)
    labels = rng.permutation(np.arange(cfg.n_trials) % cfg.n_classes)
    t = np.arange(cfg.time_points) / cfg.fs_hz
    eeg = np.zeros((cfg.n_trials, cfg.eeg_channels, cfg.time_points))
    emg = np.zeros((cfg.n_trials, cfg.emg_channels, cfg.time_points))
    samples = np.arange(cfg.time_points)
    width = cfg.time_points / 10.0

    for trial, label in enumerate(labels):
        channels = [i for i in range(cfg.eeg_channels) if i % cfg.n_classes == label]
        phases = rng.uniform(len(channels), 0.0, 2.0 * math.pi)
        for channel, phase in zip(channels, phases):
            eeg[trial, channel] = np.sin(2.0 * math.pi * class_tone_hz(int(label)) * t + phase)
        center = (label + 1) / (cfg.n_classes + 1) * cfg.time_points
        envelope = np.exp(-0.5 * ((samples - center) / width) ** 2)
        emg[trial] = envelope * rng.normal((cfg.emg_channels, cfg.time_points))

    if math.isfinite(cfg.snr):
        scale = math.sqrt(0.5 / cfg.snr)
        eeg += rng.normal(eeg.shape, scale)
        emg += rng.normal(emg.shape, scale)
    return TrialSet(eeg=eeg, emg=emg, labels=labels, fs_hz=cfg.fs_hz,
                    class_names=default_class_names(cfg.n_classes))
