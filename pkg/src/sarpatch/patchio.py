"""Binary patch blobs: the exchange format for loss checking.

Layout: 16-byte header (8-byte magic, uint32 width, uint32 height,
little-endian) followed by width*height float32 samples, row-major,
little-endian.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"SARPATCH"
_HEADER = struct.Struct("<8sII")


def write_patch_blob(samples: np.ndarray, path) -> None:
    samples = np.asarray(samples)
    if samples.ndim != 2:
        raise ValueError("patch blobs hold a single 2-D image")
    height, width = samples.shape
    payload = np.ascontiguousarray(samples, dtype="<f4")
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, width, height))
        fh.write(payload.tobytes())


def read_patch_blob(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, width, height = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 4 * width * height
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    samples = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    return samples.reshape(height, width).astype(np.float32)
