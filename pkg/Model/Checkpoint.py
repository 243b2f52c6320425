"""
"FACK" checkpoint file:

    magic   4 bytes  b"FACK"
    version u16 LE
    hlen    u32 LE   byte length of the header
    header  hlen     UTF-8 JSON: model config, filter-bank config, manifest [[name, shape], ...]
    values  f64 LE   every parameter, flattened row-major, in manifest order

The trial container ("FACT") has a fixed trials x channels x samples f32 layout and cannot hold
named parameters of arbitrary shape at f64, so checkpoints use their own magic. Each reader
rejects the other's files on the magic check.
"""
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from FilterBank.FilterBank import FilterBankConfig
from Model.ModelConfig import ModelConfig
from Model.ModelParams import ModelParams, model_param_specs
from faconf_logging import logger
from util.FAConfException import FormatException
from util.FileUtil import ensure_parent_dir

CHECKPOINT_MAGIC = b"FACK"
CHECKPOINT_VERSION = 1
_PREFIX_BYTES = 4 + 2 + 4


class CheckpointHeader(BaseModel):
    model: ModelConfig = Field(..., description="Architecture the parameters belong to")
    filter_bank: FilterBankConfig = Field(..., description="Bank the model was trained behind")
    manifest: List[Tuple[str, List[int]]] = Field(..., description="Ordered parameter names and shapes")


class Checkpoint(BaseModel):
    """A loaded checkpoint."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: ModelConfig
    bank_config: FilterBankConfig
    params: ModelParams


def save_checkpoint(path: str, config: ModelConfig, params: ModelParams, bank_config: FilterBankConfig) -> None:
    header = CheckpointHeader(model=config, filter_bank=bank_config,
                              manifest=[(name, list(shape)) for name, shape in params.manifest()])
    header_bytes = header.model_dump_json().encode("utf-8")
    values = [t.data.astype("<f8").ravel() for _, t in params.items()]
    with open(ensure_parent_dir(path), "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(np.array([CHECKPOINT_VERSION], dtype="<u2").tobytes())
        f.write(np.array([len(header_bytes)], dtype="<u4").tobytes())
        f.write(header_bytes)
        for chunk in values:
            f.write(chunk.tobytes())
    logger.debug(f"Wrote checkpoint {path} ({params.count()} parameters)")


def load_checkpoint(path: str) -> Checkpoint:
    """
    Raises:
        FormatException: Bad magic or version, unreadable header, a manifest that
            does not match the architecture, or a payload of the wrong length.
    """
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _PREFIX_BYTES or raw[:4] != CHECKPOINT_MAGIC:
        raise FormatException("magic", f"{path} is not a checkpoint (expected {CHECKPOINT_MAGIC!r})")
    version = int(np.frombuffer(raw, dtype="<u2", count=1, offset=4)[0])
    if version != CHECKPOINT_VERSION:
        raise FormatException("version", f"checkpoint version {version}, expected {CHECKPOINT_VERSION}")
    header_len = int(np.frombuffer(raw, dtype="<u4", count=1, offset=6)[0])
    if len(raw) < _PREFIX_BYTES + header_len:
        raise FormatException("header", f"header needs {header_len} bytes, file has {len(raw) - _PREFIX_BYTES}")
    try:
        header = CheckpointHeader.model_validate_json(raw[_PREFIX_BYTES:_PREFIX_BYTES + header_len])
    except ValidationError as e:
        raise FormatException("header", f"invalid checkpoint header: {e}") from e

    expected = [(spec.name, list(spec.shape)) for spec in model_param_specs(header.model)]
    if header.manifest != expected:
        mismatched = next(((a, b) for a, b in zip(header.manifest, expected) if a != b), None)
        detail = (f"'{mismatched[0][0]}' {mismatched[0][1]} vs expected '{mismatched[1][0]}' {mismatched[1][1]}"
                  if mismatched else f"{len(header.manifest)} entries vs expected {len(expected)}")
        raise FormatException("manifest", f"parameters do not match the stored architecture: {detail}")

    payload = raw[_PREFIX_BYTES + header_len:]
    sizes = [int(np.prod(shape)) for _, shape in header.manifest]
    expected_bytes = 8 * sum(sizes)
    if len(payload) != expected_bytes:
        raise FormatException("payload", f"expected {expected_bytes} bytes of values, found {len(payload)}")

    values = np.frombuffer(payload, dtype="<f8")
    arrays, offset = {}, 0
    for (name, shape), size in zip(header.manifest, sizes):
        arrays[name] = values[offset:offset + size].reshape(shape).astype(np.float64)
        offset += size
    params = ModelParams.from_arrays(header.model, arrays)
    return Checkpoint(config=header.model, bank_config=header.filter_bank, params=params)
