"""Binary tensor files: the carrier for feature maps and head weights.

Layout (all integers little-endian):

    offset  size  field
    0       4     magic "GZPL"
    4       2     format version (u16), currently 1
    6       1     dtype tag (u8), 1 = float32
    7       1     rank (u8)
    8       4*r   dims (u32 each)
    8+4r    4*n   payload: row-major float32, n = product(dims)
    end     4     CRC32 of the payload bytes (u32)

store/load round-trips are bit-exact. Loaders must keep reading every
prior version; there is only version 1 so far.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from gazepool.errors import FormatError

MAGIC = b"GZPL"
VERSION = 1
DTYPE_F32 = 1

_HEADER = struct.Struct("<4sHBB")


def store_tensor(path, array) -> None:
    """Write a float32 tensor; parent directories are created as needed."""
    arr = np.ascontiguousarray(array, dtype=np.float32)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = arr.tobytes()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, DTYPE_F32, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload)))


def load_tensor(path) -> np.ndarray:
    """Read a tensor back; every malformation gets a distinct diagnostic."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read tensor file: {exc}") from exc
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, version, dtype, rank = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at offset 0")
    if version > VERSION or version < 1:
        raise FormatError(f"{path}: unsupported format version {version}")
    if dtype != DTYPE_F32:
        raise FormatError(f"{path}: unsupported dtype tag {dtype}")
    dims_end = _HEADER.size + 4 * rank
    if len(blob) < dims_end:
        raise FormatError(f"{path}: truncated dims at offset {_HEADER.size}")
    dims = struct.unpack_from(f"<{rank}I", blob, _HEADER.size)
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    expected = count * 4
    actual = len(blob) - dims_end - 4
    if actual != expected:
        raise FormatError(
            f"{path}: payload length mismatch: expected {expected} bytes, "
            f"got {actual}"
        )
    payload = blob[dims_end : dims_end + expected]
    (crc_stored,) = struct.unpack_from("<I", blob, dims_end + expected)
    crc_actual = zlib.crc32(payload)
    if crc_stored != crc_actual:
        raise FormatError(
            f"{path}: checksum mismatch: stored {crc_stored:#010x}, "
            f"computed {crc_actual:#010x}"
        )
    arr = np.frombuffer(payload, dtype="<f4").reshape(dims)
    return arr.astype(np.float32, copy=True)
