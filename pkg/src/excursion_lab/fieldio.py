"""EXCF1 binary field dumps.

Layout (little-endian): magic ``EXCF1``, u32 rows, u32 cols, f64 x0, f64 y0,
f64 h, u64 seed, then rows*cols f64 values in row-major order.
"""
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .field_synth import FieldSample
from .geometry import GridSpec, Rect

MAGIC = b"EXCF1"
_HEADER = struct.Struct("<5sIIdddQ")


def dumps(field: FieldSample) -> bytes:
    g = field.grid
    head = _HEADER.pack(MAGIC, g.rows, g.cols, g.extent.x0, g.extent.y0, g.pitch,
                        int(field.seed) & 0xFFFFFFFFFFFFFFFF)
    return head + np.ascontiguousarray(field.values, dtype="<f8").tobytes()


def loads(data: bytes) -> FieldSample:
    if len(data) < _HEADER.size or data[:5] != MAGIC:
        raise ConfigurationError("not an EXCF1 field dump")
    _, rows, cols, x0, y0, h, seed = _HEADER.unpack_from(data)
    n = rows * cols
    body = data[_HEADER.size:]
    if len(body) != 8 * n:
        raise ConfigurationError(f"EXCF1 payload has {len(body)} bytes, expected {8 * n}")
    values = np.frombuffer(body, dtype="<f8").reshape(rows, cols)
    grid = GridSpec(h, Rect(x0, y0, x0 + (cols - 1) * h, y0 + (rows - 1) * h))
    return FieldSample(grid, values, seed)


def write_field(field: FieldSample, path) -> None:
    path = Path(path)
    try:
        path.write_bytes(dumps(field))
    except OSError as exc:
        raise OSError(f"cannot write field dump {path}: {exc}") from exc


def read_field(path) -> FieldSample:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read field dump {path}: {exc}") from exc
    return loads(data)
