"""
CSV layout for externally converted trials.

EEG and EMG files: no header, one row per (trial, channel) in trial-major
order, one column per time sample. Labels file: one integer class id per
line. All three files agree on the number of trials.
"""
import re
from typing import List, Optional

import numpy as np
import pandas as pd

from DataIO.TrialSet import TrialSet, default_class_names
from faconf_logging import logger
from util.FAConfException import FormatException
from util.FileUtil import ensure_parent_dir

_LINE = re.compile(r"line (\d+)")


def _read_table(path: str) -> np.ndarray:
    """
    Numeric matrix from a header-less CSV.

    Raises:
        FormatException: 'ragged' for rows of unequal width, 'parse' for a cell
            that is not a number; both with 1-based row and column.
    """
    try:
        raw = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        return np.zeros((0, 0))
    except pd.errors.ParserError as e:
        match = _LINE.search(str(e))
        raise FormatException("ragged", f"{path}: {e}", row=int(match.group(1)) if match else None) from e

    raw = raw.fillna("")
    blank = raw.apply(lambda column: column.str.strip() == "")
    if blank.to_numpy().any():
        row, column = np.argwhere(blank.to_numpy())[0]
        raise FormatException("ragged", f"{path}: row has {int((~blank.iloc[row]).sum())} values, "
                                        f"expected {raw.shape[1]}", row=int(row) + 1, column=int(column) + 1)
    values = raw.apply(pd.to_numeric, errors="coerce")
    bad = values.isna().to_numpy()
    if bad.any():
        row, column = np.argwhere(bad)[0]
        raise FormatException("parse", f"{path}: cannot parse {raw.iat[row, column]!r} as a number",
                              row=int(row) + 1, column=int(column) + 1)
    return values.to_numpy(dtype=np.float64)


def _read_labels(path: str) -> np.ndarray:
    table = _read_table(path)
    if table.size == 0:
        return np.zeros(0, dtype=np.int64)
    if table.shape[1] != 1:
        raise FormatException("labels", f"{path}: expected one label per line, found {table.shape[1]} columns")
    labels = table[:, 0]
    fractional = np.flatnonzero(labels != np.round(labels))
    if fractional.size:
        raise FormatException("parse", f"{path}: label {labels[fractional[0]]:g} is not an integer",
                              row=int(fractional[0]) + 1, column=1)
    return labels.astype(np.int64)


def _trials(table: np.ndarray, n_trials: int, channels: Optional[int], path: str) -> np.ndarray:
    if channels is not None and table.shape[0] != n_trials * channels:
        raise FormatException("count", f"{path}: {table.shape[0]} rows, expected {n_trials} labels x "
                                       f"{channels} channels = {n_trials * channels}")
    if n_trials == 0:
        return np.zeros((0, channels or 0, table.shape[1]))
    if table.shape[0] % n_trials:
        raise FormatException("count", f"{path}: {table.shape[0]} rows do not split into {n_trials} trials",
                              row=table.shape[0])
    return table.reshape(n_trials, table.shape[0] // n_trials, table.shape[1])


def import_csv(eeg_path: str, emg_path: str, labels_path: str, fs: float,
               class_names: Optional[List[str]] = None, subject_id: Optional[str] = None,
               eeg_channels: Optional[int] = None, emg_channels: Optional[int] = None) -> TrialSet:
    """
    Assemble a TrialSet from the three CSV files.

    Args:
        class_names: Defaults to class0..class{max label}.
        eeg_channels, emg_channels: When given, the row counts must equal labels x channels.

    Raises:
        FormatException: On ragged rows, unparseable cells, or counts that do not agree.
    """
    labels = _read_labels(labels_path)
    eeg = _trials(_read_table(eeg_path), labels.shape[0], eeg_channels, eeg_path)
    emg = _trials(_read_table(emg_path), labels.shape[0], emg_channels, emg_path)
    if eeg.shape[2] != emg.shape[2]:
        raise FormatException("count", f"EEG rows have {eeg.shape[2]} samples, EMG rows {emg.shape[2]}")
    if class_names is None:
        class_names = default_class_names(int(labels.max()) + 1 if labels.size else 1)
    trials = TrialSet(eeg=eeg, emg=emg, labels=labels, fs_hz=fs, class_names=class_names, subject_id=subject_id)
    logger.info(f"Imported {trials.summary()}")
    return trials


def export_csv(trials: TrialSet, eeg_path: str, emg_path: str, labels_path: str) -> None:
    """Inverse of import_csv; values are written at full float64 precision."""
    n = trials.n_trials
    pd.DataFrame(trials.eeg.reshape(n * trials.eeg_channels, trials.time_points)).to_csv(
        ensure_parent_dir(eeg_path), header=False, index=False)
    pd.DataFrame(trials.emg.reshape(n * trials.emg_channels, trials.time_points)).to_csv(
        ensure_parent_dir(emg_path), header=False, index=False)
    pd.DataFrame(trials.labels).to_csv(ensure_parent_dir(labels_path), header=False, index=False)
