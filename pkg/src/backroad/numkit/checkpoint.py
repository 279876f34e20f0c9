"""Versioned binary checkpoint: named f64 tensors plus an architecture tag.

Layout (all integers little-endian):
    magic  b"BKRD"
    u16    format version (currently 1)
    u16    arch tag length, utf-8 bytes
    u32    metadata JSON length, utf-8 bytes
    u32    entry count
    entry: u16 name length, utf-8 bytes
           u8  ndim
           u32 dims[ndim]
           f64 data (row-major, little-endian)
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"BKRD"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path, arch: str, tensors: dict[str, np.ndarray],
                    meta: dict | None = None) -> None:
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<H", VERSION)
    tag = arch.encode("utf-8")
    blob += struct.pack("<H", len(tag)) + tag
    mj = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    blob += struct.pack("<I", len(mj)) + mj
    blob += struct.pack("<I", len(tensors))
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype=np.float64)
        nb = name.encode("utf-8")
        blob += struct.pack("<H", len(nb)) + nb
        blob += struct.pack("<B", arr.ndim)
        for d in arr.shape:
            blob += struct.pack("<I", d)
        blob += arr.astype("<f8").tobytes()
    Path(path).write_bytes(bytes(blob))


def load_checkpoint(path):
    """Returns (arch, tensors, meta)."""
    raw = Path(path).read_bytes()
    off = 0

    def take(n):
        nonlocal off
        if off + n > len(raw):
            raise CheckpointError("truncated checkpoint")
        chunk = raw[off:off + n]
        off += n
        return chunk

    if take(4) != MAGIC:
        raise CheckpointError("bad magic, not a checkpoint file")
    (version,) = struct.unpack("<H", take(2))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (taglen,) = struct.unpack("<H", take(2))
    arch = take(taglen).decode("utf-8")
    (mlen,) = struct.unpack("<I", take(4))
    meta = json.loads(take(mlen).decode("utf-8"))
    (count,) = struct.unpack("<I", take(4))
    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = take(nlen).decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{ndim}I", take(4 * ndim)) if ndim else ()
        size = 1
        for d in dims:
            size *= d
        arr = np.frombuffer(take(8 * size), dtype="<f8").reshape(dims).copy()
        tensors[name] = arr
    if off != len(raw):
        raise CheckpointError("trailing bytes after last tensor")
    return arch, tensors, meta
