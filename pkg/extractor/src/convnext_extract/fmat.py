"""Writer for the .fmat feature-matrix format.

Layout: "FMAT" magic, u32 version 1, u64 n, u64 d, n*d little-endian
float32 row-major, u64 id-block byte length, UTF-8 ids joined by "\\n".
Deliberately a standalone copy of the format so this package does not
import the consumer.
"""

import struct
from pathlib import Path

import numpy as np

MAGIC = b"FMAT"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sIQQ")
_U64 = struct.Struct("<Q")


def write_fmat(data: np.ndarray, ids, path) -> None:
    data = np.ascontiguousarray(data, dtype="<f4")
    if data.ndim != 2:
        raise ValueError("feature matrix must be 2-D")
    n, d = data.shape
    if len(ids) != n:
        raise ValueError(f"got {len(ids)} ids for {n} rows")
    if not np.isfinite(data).all():
        raise ValueError("refusing to write non-finite features")
    id_block = "\n".join(ids).encode("utf-8")
    Path(path).write_bytes(
        _HEADER.pack(MAGIC, FORMAT_VERSION, n, d)
        + data.tobytes(order="C")
        + _U64.pack(len(id_block))
        + id_block
    )
