"""``RPC1`` frame-cloud files and CSV / PLY exporters.

Layout (little-endian): magic ``RPC1``, u32 frame count, then per frame a
u32 index, f32 timestamp and 128 x 6 float32 (x, y, z, r, v, intensity_db).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .dsp import POINTS_PER_FRAME, FrameCloud
from .errors import FormatError

MAGIC = b"RPC1"
CHANNELS = ("x", "y", "z", "r", "v", "intensity_db")
_HEADER = struct.Struct("<4sI")
FRAME_DTYPE = np.dtype([("index", "<u4"), ("timestamp", "<f4"), ("points", "<f4", (POINTS_PER_FRAME, 6))])


def write_clouds(clouds, path) -> None:
    clouds = list(clouds)
    rec = np.zeros(len(clouds), dtype=FRAME_DTYPE)
    for i, c in enumerate(clouds):
        rec[i] = (c.frame_index, c.timestamp, c.points)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, len(clouds)))
        fh.write(rec.tobytes())


def read_header(path) -> int:
    """Frame count declared in the header; raises on bad magic or size."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
    if len(head) < _HEADER.size or head[:4] != MAGIC:
        raise FormatError(f"bad header: {path}")
    (count,) = struct.unpack_from("<I", head, 4)
    size = path.stat().st_size
    expected = _HEADER.size + count * FRAME_DTYPE.itemsize
    if size != expected:
        stored = (size - _HEADER.size) / FRAME_DTYPE.itemsize
        raise FormatError(f"frame count mismatch: header says {count}, file holds {stored:g} frames ({path})")
    return count


def read_clouds(path) -> list[FrameCloud]:
    count = read_header(path)
    rec = np.fromfile(path, dtype=FRAME_DTYPE, count=count, offset=_HEADER.size)
    return [FrameCloud(int(r["index"]), float(r["timestamp"]), r["points"].astype(np.float64)) for r in rec]


def clouds_equal_bytes(a, b) -> bool:
    return Path(a).read_bytes() == Path(b).read_bytes()


def export_csv(cloud: FrameCloud, path) -> None:
    pts = cloud.points.astype(np.float32)
    lines = [",".join(CHANNELS)]
    lines += [",".join(repr(float(v)) for v in row) for row in pts]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def export_ply(cloud: FrameCloud, path) -> None:
    dt = np.dtype([(c, "<f4") for c in CHANNELS])
    rec = np.zeros(len(cloud.points), dtype=dt)
    for i, c in enumerate(CHANNELS):
        rec[c] = cloud.points[:, i]
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {len(rec)}"]
    header += [f"property float {c}" for c in CHANNELS]
    header.append("end_header")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(rec.tobytes())
