"""Portable binary dump of low-rank factors.

Layout (all integers little-endian)::

    8 bytes   magic  b"LRFACT01"
    8 bytes   uint64 length H of the JSON header
    H bytes   UTF-8 JSON: {"format": "matrix"|"htt", "dims": [...],
              "ranks": [...], "factors": [{"name", "shape"}, ...]}
    payload   each factor in header order as float64 little-endian,
              column-major (Fortran) order

Rank-0 containers have zero-length payloads.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .htt import HTTensor
from .matrix import LowRankMatrix

MAGIC = b"LRFACT01"

_FIELDS = {
    "matrix": ("space_basis", "core", "angle_basis"),
    "htt": ("leaf_x", "leaf_oz", "leaf_theta", "transfer_23", "transfer_root"),
}


def save_factors(v, path) -> None:
    if isinstance(v, HTTensor):
        fmt, dims, ranks = "htt", list(v.dims), list(v.ranks)
    elif isinstance(v, LowRankMatrix):
        fmt, dims, ranks = "matrix", list(v.shape), [v.rank]
    else:
        raise TypeError(f"cannot dump {type(v).__name__}")
    arrays = [np.asarray(getattr(v, f), dtype="<f8") for f in _FIELDS[fmt]]
    header = {
        "format": fmt,
        "dims": dims,
        "ranks": ranks,
        "factors": [{"name": f, "shape": list(a.shape)} for f, a in zip(_FIELDS[fmt], arrays)],
    }
    blob = json.dumps(header).encode("utf-8")
    with open(Path(path), "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for a in arrays:
            fh.write(a.tobytes(order="F"))


def load_factors(path):
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not a low-rank factor dump")
    (hlen,) = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16 : 16 + hlen].decode("utf-8"))
    fmt = header["format"]
    if fmt not in _FIELDS:
        raise ValueError(f"{path}: unknown format tag {fmt!r}")
    offset = 16 + hlen
    parts = {}
    for spec in header["factors"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
        parts[spec["name"]] = arr.reshape(shape, order="F").astype(float)
        offset += 8 * count
    if offset != len(data):
        raise ValueError(f"{path}: trailing or missing payload bytes")
    cls = HTTensor if fmt == "htt" else LowRankMatrix
    return cls(**parts)
