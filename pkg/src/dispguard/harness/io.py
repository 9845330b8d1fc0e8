"""Sensor data files.

Point clouds use the KITTI velodyne layout: a headerless run of
little-endian float32 ``(x, y, z, intensity)`` records.

Disparity maps use PFM: a ``Pf`` line, a ``width height`` line and a scale
line whose negative sign marks little-endian data, followed by float32
samples with the bottom image row first (standard PFM order). Invalid
pixels are stored as NaN.
"""
from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from dispguard.errors import ParseError
from dispguard.sensors import DisparityMap, PointCloud

_RECORD = 16


def save_point_cloud(cloud: PointCloud, path) -> None:
    Path(path).write_bytes(cloud.points.astype("<f4", copy=False).tobytes())


def load_point_cloud(path) -> PointCloud:
    raw = Path(path).read_bytes()
    usable = len(raw) - len(raw) % _RECORD
    if usable != len(raw):
        raise ParseError(
            f"truncated point record: {len(raw)} bytes is not a multiple of {_RECORD}",
            usable)
    pts = np.frombuffer(raw, dtype="<f4").reshape(-1, 4)
    bad = ~np.isfinite(pts)
    if bad.any():
        flat = int(np.flatnonzero(bad.ravel())[0])
        raise ParseError("non-finite value in point cloud", flat * 4)
    return PointCloud(pts.astype(np.float32))


# a single newline ends each line; payload bytes may themselves look like whitespace
_HEADER = re.compile(rb"\APf[ \t]*\n(\d+)[ \t]+(\d+)[ \t]*\n([-+0-9.eE]+)[ \t]*\n")


def save_disparity_map(dmap: DisparityMap, path) -> None:
    values = np.where(dmap.valid, dmap.values, np.nan).astype("<f4")
    header = f"Pf\n{dmap.width} {dmap.height}\n-1.0\n".encode("ascii")
    Path(path).write_bytes(header + np.flipud(values).tobytes())


def load_disparity_map(path, source_pair: Tuple[int, int] = (-1, -1),
                       baseline: float = 0.0) -> DisparityMap:
    raw = Path(path).read_bytes()
    if not raw.startswith(b"Pf"):
        raise ParseError("missing 'Pf' magic (only single-channel PFM is supported)", 0)
    m = _HEADER.match(raw)
    if m is None:
        line_end = raw.find(b"\n")
        raise ParseError("malformed PFM header", max(line_end + 1, 0))
    width, height = int(m.group(1)), int(m.group(2))
    try:
        scale = float(m.group(3))
    except ValueError:
        raise ParseError("malformed PFM scale", m.start(3)) from None
    if scale == 0:
        raise ParseError("PFM scale must be nonzero", m.start(3))
    start = m.end()
    need = width * height * 4
    if len(raw) - start < need:
        raise ParseError(
            f"truncated payload: expected {need} bytes, found {len(raw) - start}",
            len(raw))
    dtype = "<f4" if scale < 0 else ">f4"
    values = np.frombuffer(raw, dtype=dtype, count=width * height, offset=start)
    values = np.flipud(values.reshape(height, width)).astype(np.float32)
    valid = ~np.isnan(values)
    if np.isinf(values).any():
        flat = int(np.flatnonzero(np.isinf(np.flipud(values)).ravel())[0])
        raise ParseError("infinite disparity value", start + 4 * flat)
    return DisparityMap(values, valid, tuple(source_pair), baseline)


def write_json(obj, path) -> None:
    text = json.dumps(obj, indent=1, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())
