"""Minimal binary little-endian PLY reader/writer for triangle meshes."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import FormatError

_SCALAR = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def write_ply(path, vertices, faces=None) -> None:
    vertices = np.asarray(vertices, dtype="<f4").reshape(-1, 3)
    faces = None if faces is None else np.asarray(faces, dtype="<i4").reshape(-1, 3)
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {len(vertices)}",
              "property float x", "property float y", "property float z"]
    if faces is not None:
        header += [f"element face {len(faces)}", "property list uchar int vertex_indices"]
    header.append("end_header")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(vertices.tobytes())
        if faces is not None:
            rec = np.empty(len(faces), dtype=[("n", "u1"), ("idx", "<i4", (3,))])
            rec["n"] = 3
            rec["idx"] = faces
            fh.write(rec.tobytes())


def read_ply(path):
    """Return ``(vertices float64 (V,3), faces int64 (F,3) or None)``."""
    data = Path(path).read_bytes()
    end = data.find(b"end_header\n")
    if not data.startswith(b"ply") or end < 0:
        raise FormatError(f"bad header: not a PLY file: {path}")
    lines = data[:end].decode("ascii", "replace").splitlines()
    body = memoryview(data)[end + len(b"end_header\n"):]
    if "format binary_little_endian 1.0" not in lines:
        raise FormatError(f"only binary_little_endian PLY is supported: {path}")

    elements = []
    for line in lines:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "element":
            elements.append({"name": parts[1], "count": int(parts[2]), "props": []})
        elif parts[0] == "property":
            if not elements:
                raise FormatError(f"property before element in {path}")
            if parts[1] == "list":
                elements[-1]["props"].append((parts[4], ("list", _SCALAR[parts[2]], _SCALAR[parts[3]])))
            else:
                elements[-1]["props"].append((parts[2], _SCALAR[parts[1]]))

    vertices = faces = None
    offset = 0
    for el in elements:
        has_list = any(isinstance(t, tuple) for _, t in el["props"])
        if not has_list:
            dt = np.dtype([(n, "<" + t) for n, t in el["props"]])
            size = dt.itemsize * el["count"]
            if offset + size > len(body):
                raise FormatError(f"truncated PLY element {el['name']}: {path}")
            arr = np.frombuffer(body[offset:offset + size], dtype=dt)
            offset += size
            if el["name"] == "vertex":
                vertices = np.stack([arr["x"], arr["y"], arr["z"]], axis=1).astype(np.float64)
        else:
            if el["name"] != "face" or len(el["props"]) != 1:
                raise FormatError(f"unsupported list element {el['name']}: {path}")
            _, (_, count_t, idx_t) = el["props"][0]
            cdt, idt = np.dtype("<" + count_t), np.dtype("<" + idx_t)
            # Fast path: all-triangle faces.
            rec = np.dtype([("n", cdt), ("idx", idt, (3,))])
            size = rec.itemsize * el["count"]
            if offset + size > len(body):
                raise FormatError(f"truncated PLY element face: {path}")
            arr = np.frombuffer(body[offset:offset + size], dtype=rec)
            if np.any(arr["n"] != 3):
                raise FormatError(f"only triangle faces are supported: {path}")
            faces = arr["idx"].astype(np.int64)
            offset += size
    if vertices is None:
        raise FormatError(f"PLY has no vertex element: {path}")
    return vertices, faces
