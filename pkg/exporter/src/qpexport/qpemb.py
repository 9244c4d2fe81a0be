"""QPEMB container writer (and a reader used to validate our own output).

Layout, little-endian: magic "QPEM", version u32=1, dim u32, count u64;
per record: id u64, token_count u32, then token_count*dim binary32 values
row-major. Only real tokens are stored, never padding rows.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"QPEM"
VERSION = 1
_HEADER = struct.Struct("<4sIIQ")
_RECORD_HEAD = struct.Struct("<QI")


class QpembError(RuntimeError):
    pass


def write_qpemb(path: str | Path, records: list[tuple[int, np.ndarray]], dim: int):
    if dim <= 0:
        raise QpembError(f"dim must be positive, got {dim}")
    seen: set[int] = set()
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, dim, len(records)))
        for ex_id, matrix in records:
            if ex_id in seen:
                raise QpembError(f"duplicate example id {ex_id}")
            seen.add(ex_id)
            matrix = np.ascontiguousarray(matrix, dtype="<f4")
            if matrix.ndim != 2 or matrix.shape[1] != dim or matrix.shape[0] < 1:
                raise QpembError(f"example {ex_id}: bad matrix shape {matrix.shape}")
            f.write(_RECORD_HEAD.pack(ex_id, matrix.shape[0]))
            f.write(matrix.tobytes())


def read_qpemb(path: str | Path) -> tuple[int, dict[int, np.ndarray]]:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise QpembError("truncated header")
    magic, version, dim, count = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC or version != VERSION or dim <= 0:
        raise QpembError(f"bad header: magic={magic!r} version={version} dim={dim}")
    out: dict[int, np.ndarray] = {}
    offset = _HEADER.size
    for _ in range(count):
        ex_id, n = _RECORD_HEAD.unpack_from(blob, offset)
        offset += _RECORD_HEAD.size
        values = np.frombuffer(blob, dtype="<f4", count=n * dim, offset=offset)
        out[ex_id] = values.reshape(n, dim).copy()
        offset += n * dim * 4
    if offset != len(blob):
        raise QpembError("trailing bytes after last record")
    return dim, out
