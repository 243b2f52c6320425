"""
"FACT" trial container, all fields little-endian:

    magic      4 bytes  b"FACT"
    version    u16
    n_trials   u32
    channels   u32      EEG channels C
    emg        u32      EMG channels
    samples    u32      T
    fs         f32
    n_classes  u16
    labels     u16 x n_trials
    eeg        f32 x n_trials*C*T     trial-major, channel-major, time-minor
    emg        f32 x n_trials*emg*T   same layout
    [meta]     b"META", u32 length, UTF-8 JSON {class_names, subject_id}   optional
"""
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from DataIO.TrialSet import TrialSet, default_class_names
from faconf_logging import logger
from util.FAConfException import FormatException
from util.FileUtil import ensure_parent_dir

CONTAINER_MAGIC = b"FACT"
CONTAINER_VERSION = 1
META_MAGIC = b"META"
HEADER_BYTES = 28

_HEADER = np.dtype([("magic", "S4"), ("version", "<u2"), ("n_trials", "<u4"), ("channels", "<u4"),
                    ("emg_channels", "<u4"), ("samples", "<u4"), ("fs", "<f4"), ("n_classes", "<u2")])


class ContainerMeta(BaseModel):
    class_names: List[str] = Field(..., min_length=1)
    subject_id: Optional[str] = None


def payload_bytes(n_trials: int, channels: int, emg_channels: int, samples: int) -> int:
    return 2 * n_trials + 4 * n_trials * channels * samples + 4 * n_trials * emg_channels * samples


def container_size(trials: TrialSet, with_meta: bool = False) -> int:
    """Exact file size write_container produces."""
    size = HEADER_BYTES + payload_bytes(trials.n_trials, trials.eeg_channels, trials.emg_channels,
                                        trials.time_points)
    if with_meta:
        size += 8 + len(_meta_json(trials))
    return size


def _meta_json(trials: TrialSet) -> bytes:
    return ContainerMeta(class_names=trials.class_names, subject_id=trials.subject_id).model_dump_json().encode("utf-8")


def write_container(trials: TrialSet, path: str, with_meta: Optional[bool] = None) -> None:
    """
    Samples are stored as f32. The META block is written when requested, or by
    default whenever the class names or subject differ from the plain defaults.

    Raises:
        OSError: If the path cannot be written.
    """
    if with_meta is None:
        with_meta = trials.subject_id is not None or trials.class_names != default_class_names(trials.n_classes)
    header = np.zeros(1, dtype=_HEADER)
    header[0] = (CONTAINER_MAGIC, CONTAINER_VERSION, trials.n_trials, trials.eeg_channels, trials.emg_channels,
                 trials.time_points, trials.fs_hz, trials.n_classes)
    with open(ensure_parent_dir(path), "wb") as f:
        f.write(header.tobytes())
        f.write(trials.labels.astype("<u2").tobytes())
        f.write(np.ascontiguousarray(trials.eeg, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(trials.emg, dtype="<f4").tobytes())
        if with_meta:
            meta = _meta_json(trials)
            f.write(META_MAGIC)
            f.write(np.array([len(meta)], dtype="<u4").tobytes())
            f.write(meta)
    logger.debug(f"Wrote container {path}: {trials.summary()}")


def read_container(path: str) -> TrialSet:
    """
    Raises:
        FormatException: Naming the failed check: magic, version, payload or meta.
    """
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 4 or raw[:4] != CONTAINER_MAGIC:
        raise FormatException("magic", f"{path} is not a trial container (expected {CONTAINER_MAGIC!r})")
    if len(raw) < HEADER_BYTES:
        raise FormatException("header", f"header needs {HEADER_BYTES} bytes, file has {len(raw)}")
    header = np.frombuffer(raw, dtype=_HEADER, count=1)[0]
    if int(header["version"]) != CONTAINER_VERSION:
        raise FormatException("version", f"container version {int(header['version'])}, expected {CONTAINER_VERSION}")

    n, c, e, t = (int(header[k]) for k in ("n_trials", "channels", "emg_channels", "samples"))
    expected = payload_bytes(n, c, e, t)
    body = raw[HEADER_BYTES:]
    tail = body[expected:]
    if len(body) < expected or (tail and tail[:4] != META_MAGIC):
        raise FormatException("payload", f"expected {expected} bytes of samples, found {len(body)}")

    labels = _section(body, "<u2", 0, (n,)).astype(np.int64)
    eeg = _section(body, "<f4", 2 * n, (n, c, t)).astype(np.float64)
    emg = _section(body, "<f4", 2 * n + 4 * n * c * t, (n, e, t)).astype(np.float64)

    meta = ContainerMeta(class_names=default_class_names(int(header["n_classes"])))
    if tail:
        meta = _read_meta(tail)
        if len(meta.class_names) != int(header["n_classes"]):
            raise FormatException("meta", f"{len(meta.class_names)} class names for {int(header['n_classes'])} classes")
    return TrialSet(eeg=eeg, emg=emg, labels=labels, fs_hz=float(header["fs"]),
                    class_names=meta.class_names, subject_id=meta.subject_id)


def _section(body: bytes, dtype: str, offset: int, shape) -> np.ndarray:
    count = int(np.prod(shape))
    if count == 0:
        return np.zeros(shape, dtype=dtype)
    return np.frombuffer(body, dtype=dtype, count=count, offset=offset).reshape(shape)


def _read_meta(tail: bytes) -> ContainerMeta:
    if len(tail) < 8:
        raise FormatException("meta", "META block is truncated")
    length = int(np.frombuffer(tail, dtype="<u4", count=1, offset=4)[0])
    if len(tail) != 8 + length:
        raise FormatException("meta", f"META block declares {length} bytes, found {len(tail) - 8}")
    try:
        return ContainerMeta.model_validate_json(tail[8:])
    except ValidationError as e:
        raise FormatException("meta", f"invalid META block: {e}") from e
