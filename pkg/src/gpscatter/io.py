"""
Field snapshots and norm tables.

Snapshot layout (little endian): magic ``b"GPF1"``, dim u32, n u32, L f64,
t f64, representation u8 (0 physical, 1 spectral), then the values in
row-major order as interleaved (re, im) f64 pairs.
"""

from __future__ import annotations

import csv
import hashlib
import struct
from pathlib import Path

import numpy as np

from .spectral import PHYSICAL, SPECTRAL, Field, make_grid

MAGIC = b"GPF1"
HEADER = struct.Struct("<4sIIddB")
_REPR_CODE = {PHYSICAL: 0, SPECTRAL: 1}
_CODE_REPR = {v: k for k, v in _REPR_CODE.items()}


def write_snapshot(path, f: Field, t: float = 0.0) -> Path:
    path = Path(path)
    g = f.grid
    head = HEADER.pack(MAGIC, g.dim, g.n, g.box_length, float(t), _REPR_CODE[f.representation])
    data = np.ascontiguousarray(f.values, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(data.tobytes(order="C"))
    return path


def read_snapshot(path) -> tuple:
    """Return ``(field, t)``."""
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise ValueError("file too short for a snapshot header")
    magic, dim, n, L, t, rep = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if rep not in _CODE_REPR:
        raise ValueError(f"bad representation code {rep}")
    grid = make_grid(dim, n, L)
    count = n**dim
    body = raw[HEADER.size :]
    if len(body) != 16 * count:
        raise ValueError(f"expected {16 * count} data bytes, found {len(body)}")
    vals = np.frombuffer(body, dtype="<c16").reshape(grid.shape).astype(complex)
    return Field(grid, vals, _CODE_REPR[rep]), t


def write_norms_csv(path, rows) -> Path:
    """Long-format table with columns t, norm_name, value."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "norm_name", "value"])
        for t, name, val in rows:
            w.writerow([repr(float(t)), name, repr(float(val))])
    return path


def read_norms_csv(path) -> list:
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        return [(float(row["t"]), row["norm_name"], float(row["value"])) for row in r]


def write_table_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return path


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
