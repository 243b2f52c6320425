from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from util.FAConfException import DataException, LabelIndexException


def default_class_names(n_classes: int) -> List[str]:
    return [f"class{i}" for i in range(n_classes)]


class TrialSet(BaseModel):
    """
    Paired EEG/EMG trials with labels.

    Attributes:
        eeg: [n_trials, C, T]
        emg: [n_trials, emg_channels, T]
        labels: [n_trials] class ids in [0, n_classes)
        fs_hz: Sampling rate shared by EEG and EMG.
        class_names: One name per class; its length is n_classes.
        subject_id: Optional subject tag.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    eeg: np.ndarray
    emg: np.ndarray
    labels: np.ndarray
    fs_hz: float = Field(..., gt=0.0)
    class_names: List[str] = Field(..., min_length=1)
    subject_id: Optional[str] = None

    @field_validator("eeg", "emg")
    @classmethod
    def _as_float(cls, value: np.ndarray) -> np.ndarray:
        value = np.asarray(value, dtype=np.float64)
        if value.ndim != 3:
            raise DataException(f"signals must be [n_trials, channels, T], got shape {value.shape}")
        return value

    @field_validator("labels")
    @classmethod
    def _as_int(cls, value: np.ndarray) -> np.ndarray:
        value = np.asarray(value)
        if value.ndim != 1:
            raise DataException(f"labels must be one-dimensional, got shape {value.shape}")
        if value.size and not np.all(np.equal(np.mod(value, 1), 0)):
            raise DataException("labels must be integers")
        return value.astype(np.int64)

    @model_validator(mode="after")
    def _consistent(self) -> "TrialSet":
        n = self.labels.shape[0]
        if self.eeg.shape[0] != n or self.emg.shape[0] != n:
            raise DataException(f"trial counts disagree: eeg {self.eeg.shape[0]}, emg {self.emg.shape[0]}, labels {n}")
        if self.eeg.shape[2] != self.emg.shape[2]:
            raise DataException(f"EEG has {self.eeg.shape[2]} samples per trial, EMG {self.emg.shape[2]}")
        bad = self.labels[(self.labels < 0) | (self.labels >= self.n_classes)]
        if bad.size:
            raise LabelIndexException(f"label {int(bad[0])} outside [0, {self.n_classes})")
        return self

    @property
    def n_trials(self) -> int:
        return int(self.labels.shape[0])

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def eeg_channels(self) -> int:
        return int(self.eeg.shape[1])

    @property
    def emg_channels(self) -> int:
        return int(self.emg.shape[1])

    @property
    def time_points(self) -> int:
        return int(self.eeg.shape[2])

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, indices: Sequence[int]) -> "TrialSet":
        indices = np.asarray(indices, dtype=np.int64)
        return TrialSet(eeg=self.eeg[indices], emg=self.emg[indices], labels=self.labels[indices],
                        fs_hz=self.fs_hz, class_names=list(self.class_names), subject_id=self.subject_id)

    def summary(self) -> str:
        subject = f" subject={self.subject_id}" if self.subject_id else ""
        counts = ",".join(str(int(c)) for c in self.class_counts())
        return (f"{self.n_trials} trials{subject}: eeg {self.eeg_channels}x{self.time_points}, "
                f"emg {self.emg_channels}x{self.time_points}, fs={self.fs_hz:g} Hz, "
                f"classes {self.n_classes} [{counts}]")
