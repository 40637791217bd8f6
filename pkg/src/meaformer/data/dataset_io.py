"""Phantom dataset files.

Layout (little-endian):

    magic "MEAD" | u32 version | u32 count | records

Record: u32 H, u32 W, H*W float32 image, run-length mask (u32 n_runs then
n_runs * (u32 start, u32 length) over the flattened row-major mask), 8
float64 endpoint coords, 4 float64 box coords, float64 spacing, u64 seed,
u16 flag-string length + utf-8 flags (';'-joined).
"""

import struct

import numpy as np

from ..errors import DatasetError
from ..geometry import Box, RecistEndpoints
from .phantom import Phantom

MAGIC = b"MEAD"
VERSION = 1


def _rle_encode(mask):
    flat = np.asarray(mask, dtype=bool).reshape(-1)
    if not flat.any():
        return np.zeros((0, 2), dtype=np.uint32)
    padded = np.concatenate([[False], flat, [False]])
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    starts, ends = edges[0::2], edges[1::2]
    return np.stack([starts, ends - starts], axis=1).astype(np.uint32)


def _rle_decode(runs, shape):
    flat = np.zeros(shape[0] * shape[1], dtype=bool)
    for start, length in runs:
        flat[start:start + length] = True
    return flat.reshape(shape)


def save_dataset(phantoms, path):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(phantoms)))
        for p in phantoms:
            h, w = p.image.shape
            fh.write(struct.pack("<II", h, w))
            fh.write(np.ascontiguousarray(p.image, dtype="<f4").tobytes())
            runs = _rle_encode(p.mask)
            fh.write(struct.pack("<I", len(runs)))
            fh.write(np.ascontiguousarray(runs, dtype="<u4").tobytes())
            fh.write(np.asarray(p.recist.as_array(), dtype="<f8").tobytes())
            fh.write(struct.pack("<4d", p.box.x0, p.box.y0, p.box.x1, p.box.y1))
            fh.write(struct.pack("<dQ", p.spacing_mm_per_px, p.seed))
            fb = ";".join(p.flags).encode()
            fh.write(struct.pack("<H", len(fb)))
            fh.write(fb)


def _read(fh, n, what):
    data = fh.read(n)
    if len(data) != n:
        raise DatasetError(f"dataset ended while reading {what}")
    return data


def iter_dataset(path):
    """Stream phantoms from `path` one record at a time."""
    with open(path, "rb") as fh:
        if _read(fh, 4, "magic") != MAGIC:
            raise DatasetError(f"{path}: bad format (magic mismatch)")
        version, count = struct.unpack("<II", _read(fh, 8, "header"))
        if version != VERSION:
            raise DatasetError(f"unsupported dataset version {version}")
        for i in range(count):
            h, w = struct.unpack("<II", _read(fh, 8, f"record {i} shape"))
            img = np.frombuffer(_read(fh, 4 * h * w, f"record {i} image"),
                                dtype="<f4").reshape(h, w).copy()
            (n_runs,) = struct.unpack("<I", _read(fh, 4, f"record {i} rle"))
            runs = np.frombuffer(_read(fh, 8 * n_runs, f"record {i} mask"),
                                 dtype="<u4").reshape(n_runs, 2)
            mask = _rle_decode(runs, (h, w))
            ep = RecistEndpoints.from_array(
                np.frombuffer(_read(fh, 64, f"record {i} endpoints"), dtype="<f8"))
            bx = struct.unpack("<4d", _read(fh, 32, f"record {i} box"))
            spacing, seed = struct.unpack("<dQ", _read(fh, 16, f"record {i} meta"))
            (flen,) = struct.unpack("<H", _read(fh, 2, f"record {i} flags"))
            flags = _read(fh, flen, f"record {i} flags").decode()
            yield Phantom(img, mask, ep, Box(*bx), spacing, seed,
                          flags=flags.split(";") if flags else [])


def load_dataset(path):
    return list(iter_dataset(path))


def dataset_count(path) -> int:
    with open(path, "rb") as fh:
        if _read(fh, 4, "magic") != MAGIC:
            raise DatasetError(f"{path}: bad format (magic mismatch)")
        version, count = struct.unpack("<II", _read(fh, 8, "header"))
        if version != VERSION:
            raise DatasetError(f"unsupported dataset version {version}")
    return count
