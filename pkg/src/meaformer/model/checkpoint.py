"""Checkpoint persistence.

Binary layout (all integers little-endian):

    magic "MEAF" | u32 version | u32 len + config text | u64 step | u64 seed
    | u32 record count | records

Each record: u16 name length, name utf-8, u8 ndim, ndim * u32 dims, raw
little-endian float32 data.  Parameters and BatchNorm running statistics are
both stored, so a round trip reproduces the forward pass bit for bit.
"""

import hashlib
import struct

import numpy as np

from ..errors import (CheckpointConfigError, CheckpointFormatError,
                      CheckpointTruncatedError, CheckpointVersionError)
from .config import ModelConfig
from .network import MeasurementNet

MAGIC = b"MEAF"
VERSION = 1


def _named_arrays(model):
    for name, p in model.named_parameters():
        yield name, p.data
    for name, b in model.named_buffers():
        yield name, b


def save_checkpoint(model, path, step=0):
    records = list(_named_arrays(model))
    cfg_blob = model.cfg.canonical_text().encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(cfg_blob)))
        fh.write(cfg_blob)
        fh.write(struct.pack("<QQ", step, model.cfg.seed))
        fh.write(struct.pack("<I", len(records)))
        for name, arr in records:
            nb = name.encode()
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read(fh, n, what):
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointTruncatedError(f"checkpoint ended while reading {what}")
    return data


def read_header(path):
    """Return (config, step, seed) without loading parameters."""
    with open(path, "rb") as fh:
        if _read(fh, 4, "magic") != MAGIC:
            raise CheckpointFormatError(f"{path}: bad format (magic mismatch)")
        (version,) = struct.unpack("<I", _read(fh, 4, "version"))
        if version != VERSION:
            raise CheckpointVersionError(f"unsupported checkpoint version {version}")
        (clen,) = struct.unpack("<I", _read(fh, 4, "config length"))
        cfg = ModelConfig.from_text(_read(fh, clen, "config").decode())
        step, seed = struct.unpack("<QQ", _read(fh, 16, "header"))
    return cfg, step, seed


def load_checkpoint(path, expected_config: ModelConfig | None = None):
    """Rebuild the model stored at `path`; returns (model, step)."""
    with open(path, "rb") as fh:
        if _read(fh, 4, "magic") != MAGIC:
            raise CheckpointFormatError(f"{path}: bad format (magic mismatch)")
        (version,) = struct.unpack("<I", _read(fh, 4, "version"))
        if version != VERSION:
            raise CheckpointVersionError(f"unsupported checkpoint version {version}")
        (clen,) = struct.unpack("<I", _read(fh, 4, "config length"))
        cfg = ModelConfig.from_text(_read(fh, clen, "config").decode())
        if expected_config is not None and cfg != expected_config:
            raise CheckpointConfigError(
                f"checkpoint config does not match the requested config:\n"
                f"stored:\n{cfg.canonical_text()}requested:\n{expected_config.canonical_text()}")
        step, _seed = struct.unpack("<QQ", _read(fh, 16, "header"))
        (count,) = struct.unpack("<I", _read(fh, 4, "record count"))
        arrays = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<H", _read(fh, 2, "record name length"))
            name = _read(fh, nlen, "record name").decode()
            (ndim,) = struct.unpack("<B", _read(fh, 1, "record ndim"))
            shape = struct.unpack(f"<{ndim}I", _read(fh, 4 * ndim, "record shape"))
            n_items = int(np.prod(shape)) if ndim else 1
            raw = _read(fh, 4 * n_items, f"record data ({name})")
            arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()

    model = MeasurementNet(cfg)
    stored = dict(_named_arrays(model))
    missing = set(stored) - set(arrays)
    extra = set(arrays) - set(stored)
    if missing or extra:
        raise CheckpointFormatError(
            f"parameter records do not match the model (missing {sorted(missing)}, "
            f"unexpected {sorted(extra)})")
    for name, arr in arrays.items():
        dst = stored[name]
        if dst.shape != arr.shape:
            raise CheckpointFormatError(f"shape mismatch for {name}")
        dst[...] = arr
    model.eval()
    return model, step


def checkpoint_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
