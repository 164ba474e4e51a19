"""Field and table serialization.

Binary field layout (little-endian)::

    offset  size  content
    0       4     magic b"LGFD"
    4       4     uint32 format version (1)
    8       4     uint32 nx
    12      4     uint32 ny
    16      32    float64 xmin, xmax, ymin, ymax
    48      8*N   float64 values, row-major (y index outer, x index inner)

CSV fields hold one row per node with columns ``x,y,value`` in the same
order. Floats are written with ``repr`` so a round trip is exact.
"""
from __future__ import annotations

import csv
import io
import struct
from pathlib import Path

import numpy as np

from .solver import DiscreteField, Grid

MAGIC = b"LGFD"
VERSION = 1
_HEADER = struct.Struct("<4sIII4d")

__all__ = ["write_field_binary", "read_field_binary", "write_field_csv", "read_field_csv",
           "write_table", "format_table", "MAGIC", "VERSION"]


def field_to_bytes(u: DiscreteField) -> bytes:
    g = u.grid
    head = _HEADER.pack(MAGIC, VERSION, g.nx, g.ny, g.xmin, g.xmax, g.ymin, g.ymax)
    return head + np.ascontiguousarray(u.values, dtype="<f8").tobytes()


def field_from_bytes(data: bytes) -> DiscreteField:
    if len(data) < _HEADER.size:
        raise ValueError("truncated field header")
    magic, version, nx, ny, x0, x1, y0, y1 = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"unsupported field format version {version}")
    n = nx * ny
    body = data[_HEADER.size:]
    if len(body) != 8 * n:
        raise ValueError(f"expected {n} values, found {len(body) / 8:g}")
    grid = Grid(nx, ny, x0, x1, y0, y1)
    vals = np.frombuffer(body, dtype="<f8").reshape(ny, nx).astype(float)
    return DiscreteField(grid, vals)


def write_field_binary(path, u: DiscreteField):
    Path(path).write_bytes(field_to_bytes(u))


def read_field_binary(path) -> DiscreteField:
    return field_from_bytes(Path(path).read_bytes())


def write_field_csv(path, u: DiscreteField):
    g = u.grid
    X, Y = g.mesh()
    with open(path, "w", newline="") as fh:
        fh.write(f"# grid nx={g.nx} ny={g.ny} xmin={g.xmin!r} xmax={g.xmax!r} "
                 f"ymin={g.ymin!r} ymax={g.ymax!r}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "value"])
        for x, y, v in zip(X.ravel(), Y.ravel(), u.values.ravel()):
            w.writerow([repr(float(x)), repr(float(y)), repr(float(v))])


def read_field_csv(path) -> DiscreteField:
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# grid"):
            raise ValueError("missing grid header line")
        meta = dict(kv.split("=") for kv in first.split()[2:])
        grid = Grid(int(meta["nx"]), int(meta["ny"]), float(meta["xmin"]), float(meta["xmax"]),
                    float(meta["ymin"]), float(meta["ymax"]))
        rows = list(csv.reader(fh))
    vals = np.array([float(r[2]) for r in rows[1:]])
    if vals.size != grid.nx * grid.ny:
        raise ValueError(f"expected {grid.nx * grid.ny} rows, found {vals.size}")
    return DiscreteField(grid, vals.reshape(grid.shape))


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def format_table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def write_table(path, header, rows):
    Path(path).write_text(format_table(header, rows))
