"""Binary on-disk cache for Green columns.

Layout, all little-endian::

    b"BILAP1" | n: u8 | M: u32 | source index: n x i32 | (M-1)^n x f64 | crc32: u32

Values are the interior array in C order.  The CRC covers every preceding byte.
"""
from __future__ import annotations

import os
import struct
import zlib
from pathlib import Path

import numpy as np

MAGIC = b"BILAP1"
ENV_VAR = "BILAP_CACHE_DIR"


class CacheError(ValueError):
    """The file is truncated, corrupted or belongs to another grid or source."""


def default_cache_dir() -> Path | None:
    value = os.environ.get(ENV_VAR)
    return Path(value) if value else None


def column_path(cache_dir, n: int, M: int, y) -> Path:
    tag = "_".join(str(int(v)) for v in y)
    return Path(cache_dir) / f"green_n{n}_M{M}_y{tag}.bin"


def encode_column(n: int, M: int, y, values: np.ndarray) -> bytes:
    values = np.ascontiguousarray(values, dtype="<f8")
    if values.size != (M - 1) ** n:
        raise ValueError("value count does not match the grid")
    body = MAGIC + struct.pack("<BI", n, M) + struct.pack(f"<{n}i", *(int(v) for v in y))
    body += values.tobytes()
    return body + struct.pack("<I", zlib.crc32(body))


def decode_column(data: bytes, n: int | None = None, M: int | None = None, y=None):
    """Parse a cache blob, returning ``(n, M, y, values)``; header mismatches raise."""
    head = len(MAGIC) + 5
    if len(data) < head + 4 or not data.startswith(MAGIC):
        raise CacheError("bad magic or truncated header")
    fn, fM = struct.unpack_from("<BI", data, len(MAGIC))
    expected = head + 4 * fn + 8 * (fM - 1) ** fn + 4
    if len(data) != expected:
        raise CacheError(f"expected {expected} bytes, found {len(data)}")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != crc:
        raise CacheError("checksum mismatch")
    fy = struct.unpack_from(f"<{fn}i", data, head)
    if (n is not None and fn != n) or (M is not None and fM != M) or \
            (y is not None and tuple(int(v) for v in y) != fy):
        raise CacheError(f"header (n={fn}, M={fM}, y={fy}) does not match the request")
    values = np.frombuffer(data, dtype="<f8", count=(fM - 1) ** fn, offset=head + 4 * fn)
    return fn, fM, fy, values.reshape((fM - 1,) * fn).astype(float)


def write_column(path, n: int, M: int, y, values: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_bytes(encode_column(n, M, y, values))
    tmp.replace(path)


def read_column(path, n: int, M: int, y) -> np.ndarray:
    return decode_column(Path(path).read_bytes(), n, M, y)[3]
