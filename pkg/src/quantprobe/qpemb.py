"""QPEMB binary container for per-example token-embedding matrices.

Little-endian layout:

    magic   "QPEM"          4 bytes
    version u32 = 1
    dim     u32
    count   u64
    then per record:
        id          u64
        token_count u32
        values      token_count * dim float32, row-major

Values are stored as binary32; readers hand them back exactly as stored
(callers widen for arithmetic). Format errors report the byte offset at
which parsing failed.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataFormatError

MAGIC = b"QPEM"
VERSION = 1

_HEADER = struct.Struct("<4sIIQ")
_RECORD_HEAD = struct.Struct("<QI")

HEADER_SIZE = _HEADER.size  # 20 bytes
RECORD_HEAD_SIZE = _RECORD_HEAD.size  # 12 bytes


def write_qpemb(path: str | Path, records: list[tuple[int, np.ndarray]], dim: int | None = None):
    """Write (example id, matrix) records. All matrices must share one dim;
    values are stored as float32."""
    if dim is None:
        if not records:
            raise DataFormatError("dim required when writing an empty file")
        dim = int(records[0][1].shape[1])
    if dim <= 0:
        raise DataFormatError(f"dim must be positive, got {dim}")
    seen: set[int] = set()
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, dim, len(records)))
        for ex_id, matrix in records:
            matrix = np.asarray(matrix)
            if matrix.ndim != 2 or matrix.shape[1] != dim:
                raise DataFormatError(
                    f"record {ex_id}: matrix shape {matrix.shape} does not match dim {dim}")
            if matrix.shape[0] < 1:
                raise DataFormatError(f"record {ex_id}: empty matrix")
            if ex_id in seen:
                raise DataFormatError(f"record {ex_id}: duplicate id")
            seen.add(ex_id)
            f.write(_RECORD_HEAD.pack(ex_id, matrix.shape[0]))
            f.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())


def read_qpemb(path: str | Path) -> tuple[int, dict[int, np.ndarray]]:
    """Read a QPEMB file; returns (dim, {example id: float32 matrix})."""
    blob = Path(path).read_bytes()

    def fail(offset: int, why: str):
        raise DataFormatError(f"{path}: {why} (at byte {offset})")

    if len(blob) < HEADER_SIZE:
        fail(len(blob), "truncated header")
    magic, version, dim, count = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        fail(0, f"bad magic {magic!r}")
    if version != VERSION:
        fail(4, f"unsupported version {version}")
    if dim <= 0:
        fail(8, f"invalid dim {dim}")

    records: dict[int, np.ndarray] = {}
    offset = HEADER_SIZE
    for _ in range(count):
        if offset + RECORD_HEAD_SIZE > len(blob):
            fail(offset, "truncated record header")
        ex_id, token_count = _RECORD_HEAD.unpack_from(blob, offset)
        offset += RECORD_HEAD_SIZE
        if token_count < 1:
            fail(offset - 4, f"record {ex_id}: invalid token_count {token_count}")
        payload = token_count * dim * 4
        if offset + payload > len(blob):
            fail(offset, f"record {ex_id}: truncated payload")
        if ex_id in records:
            fail(offset - RECORD_HEAD_SIZE, f"duplicate id {ex_id}")
        matrix = np.frombuffer(blob, dtype="<f4", count=token_count * dim, offset=offset)
        records[ex_id] = matrix.reshape(token_count, dim).copy()
        offset += payload
    if offset != len(blob):
        fail(offset, f"{len(blob) - offset} trailing bytes")
    return dim, records
