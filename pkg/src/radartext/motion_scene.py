"""Human motion ingestion, capsule skinning and frame-rate resampling.

World frame: radar at the origin looking along +y, x lateral, z up.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import MotionError, MotionFormatError, MotionValidationError
from .plyio import read_ply

MIN_TRIANGLE_AREA = 1e-12


@dataclass(frozen=True)
class JointFrame:
    timestamp: float
    joints: np.ndarray  # (J, 3) meters


@dataclass(frozen=True)
class MotionSequence:
    """Skeleton keyframes stored as one ``(T, J, 3)`` array."""

    timestamps: np.ndarray
    positions: np.ndarray
    native_fps: float
    joint_names: tuple[str, ...]

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.float64)
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 3 or pos.shape[2] != 3:
            raise MotionValidationError(f"positions must have shape (T, J, 3), got {pos.shape}")
        if ts.shape != (pos.shape[0],):
            raise MotionValidationError("one timestamp per frame required")
        if pos.shape[0] < 2:
            raise MotionValidationError("a motion sequence needs at least 2 frames")
        if not self.native_fps > 0:
            raise MotionValidationError("native_fps must be > 0")
        if len(self.joint_names) != pos.shape[1]:
            raise MotionValidationError(
                f"{len(self.joint_names)} joint names for {pos.shape[1]} joints")
        bad = np.flatnonzero(~np.isfinite(pos).all(axis=(1, 2)))
        if bad.size:
            raise MotionValidationError(f"non-finite joint coordinate in frame {int(bad[0])}")
        if not np.all(np.diff(ts) > 0):
            raise MotionValidationError("timestamps must be strictly increasing")
        ts.setflags(write=False)
        pos.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "joint_names", tuple(self.joint_names))

    def __len__(self):
        return self.positions.shape[0]

    @property
    def frames(self) -> list[JointFrame]:
        return [JointFrame(float(t), p) for t, p in zip(self.timestamps, self.positions)]

    @property
    def duration(self) -> float:
        return float(self.timestamps[-1] - self.timestamps[0])


@dataclass(frozen=True)
class BodyTemplate:
    segments: tuple[tuple[int, int, float], ...]
    bounding_box: tuple[float, float, float]

    def validate(self, joint_count: int) -> None:
        for i, (a, b, r) in enumerate(self.segments):
            if not (0 <= a < joint_count and 0 <= b < joint_count):
                raise MotionValidationError(f"segment {i} references joint outside [0, {joint_count})")
            if not r > 0:
                raise MotionValidationError(f"segment {i} radius must be > 0")
        if not all(e > 0 for e in self.bounding_box):
            raise MotionValidationError("bounding box extents must be positive")


@dataclass
class TriMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    per_vertex_velocity: np.ndarray = field(default=None)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.per_vertex_velocity is None:
            self.per_vertex_velocity = np.zeros_like(self.vertices)
        self.per_vertex_velocity = np.ascontiguousarray(
            self.per_vertex_velocity, dtype=np.float64).reshape(-1, 3)
        if self.per_vertex_velocity.shape != self.vertices.shape:
            raise MotionValidationError("one velocity per vertex required")
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)):
            raise MotionValidationError("triangle index out of range")
        if not np.isfinite(self.vertices).all() or not np.isfinite(self.per_vertex_velocity).all():
            raise MotionValidationError("non-finite vertex position or velocity")
        small = np.flatnonzero(self.triangle_areas() < MIN_TRIANGLE_AREA)
        if small.size:
            raise MotionValidationError(f"triangle {int(small[0])} has area < {MIN_TRIANGLE_AREA} m^2")

    def triangle_areas(self) -> np.ndarray:
        v = self.vertices[self.triangles]
        return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)

    def face_normals(self) -> np.ndarray:
        v = self.vertices[self.triangles]
        n = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    @staticmethod
    def concatenate(meshes: Sequence["TriMesh"]) -> "TriMesh":
        verts, tris, vels, off = [], [], [], 0
        for m in meshes:
            verts.append(m.vertices)
            tris.append(m.triangles + off)
            vels.append(m.per_vertex_velocity)
            off += len(m.vertices)
        return TriMesh(np.concatenate(verts), np.concatenate(tris), np.concatenate(vels))


# ---------------------------------------------------------------------------
# loading

def load_motion(path, format: str = "skeleton_json", *, fps: float | None = None):
    """Load a skeleton JSON document or a directory of per-frame PLY meshes.

    Returns a :class:`MotionSequence` for ``skeleton_json`` and a
    :class:`MeshSequence` for ``mesh_sequence`` (``fps`` required there,
    since PLY frames carry no timing).
    """
    path = Path(path)
    if format == "skeleton_json":
        return _load_skeleton_json(path)
    if format == "mesh_sequence":
        if fps is None:
            raise MotionError("mesh_sequence input needs an explicit fps")
        return load_mesh_sequence(path, fps)
    raise MotionError(f"unknown motion format {format!r}")


def _load_skeleton_json(path: Path) -> MotionSequence:
    if not path.is_file():
        raise MotionFormatError("motion file not found", path=path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise MotionFormatError(f"invalid JSON: {e.msg}", path=path, line=e.lineno) from e
    if not isinstance(doc, dict):
        raise MotionFormatError("top level must be an object", path=path)
    for key in ("fps", "joints", "frames"):
        if key not in doc:
            raise MotionFormatError("missing required field", path=path, field=key)
    fps = doc["fps"]
    if isinstance(fps, bool) or not isinstance(fps, (int, float)) or not fps > 0:
        raise MotionFormatError("fps must be a positive number", path=path, field="fps")
    names = doc["joints"]
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise MotionFormatError("joints must be a list of names", path=path, field="joints")
    frames = doc["frames"]
    if not isinstance(frames, list):
        raise MotionFormatError("frames must be a list", path=path, field="frames")
    rows = []
    for i, fr in enumerate(frames):
        if not isinstance(fr, list):
            raise MotionFormatError("frame must be a list of [x,y,z]", path=path, field=f"frames[{i}]")
        if len(fr) != len(names):
            raise MotionValidationError(
                f"inconsistent joint count in frame {i}: {len(fr)} != {len(names)} ({path})")
        for j, p in enumerate(fr):
            if (not isinstance(p, list) or len(p) != 3
                    or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in p)):
                raise MotionFormatError("joint must be [x, y, z] numbers", path=path,
                                        field=f"frames[{i}][{j}]")
        rows.append(fr)
    pos = np.array(rows, dtype=np.float64).reshape(len(rows), len(names), 3)
    bad = np.flatnonzero(~np.isfinite(pos).all(axis=(1, 2)))
    if bad.size:
        raise MotionValidationError(f"non-finite joint coordinate in frame {int(bad[0])} ({path})")
    ts = np.arange(len(rows), dtype=np.float64) / float(fps)
    return MotionSequence(ts, pos, float(fps), tuple(names))


def save_motion(seq: MotionSequence, path) -> None:
    doc = {
        "fps": seq.native_fps,
        "joints": list(seq.joint_names),
        "frames": seq.positions.tolist(),
    }
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# capsule skinning

def capsule_vertex_count(rings: int, sectors: int) -> int:
    return 2 * (rings * sectors + 1)


def capsule_triangle_count(rings: int, sectors: int) -> int:
    return 4 * rings * sectors


def _capsule_topology(rings: int, sectors: int) -> np.ndarray:
    rows = 2 * rings
    pole_a, pole_b = 0, 1 + rows * sectors

    def idx(row, k):
        return 1 + row * sectors + (k % sectors)

    tris = []
    for k in range(sectors):
        tris.append((pole_a, idx(0, k + 1), idx(0, k)))
    for row in range(rows - 1):
        for k in range(sectors):
            a, b = idx(row, k), idx(row, k + 1)
            c, d = idx(row + 1, k + 1), idx(row + 1, k)
            tris.append((a, b, c))
            tris.append((a, c, d))
    for k in range(sectors):
        tris.append((pole_b, idx(rows - 1, k), idx(rows - 1, k + 1)))
    return np.array(tris, dtype=np.int64)


def _capsule_local(rings: int, sectors: int):
    """Per-vertex (endpoint selector, axial, cos, sin) coefficients."""
    alphas = np.arange(1, rings + 1) / rings * (math.pi / 2)
    betas = 2 * math.pi * np.arange(sectors) / sectors
    sel, axial, radial_c, radial_s = [0.0], [-1.0], [0.0], [0.0]
    # hemisphere at a: rows from pole towards the equator
    for al in alphas:
        for be in betas:
            sel.append(0.0)
            axial.append(-math.cos(al))
            radial_c.append(math.sin(al) * math.cos(be))
            radial_s.append(math.sin(al) * math.sin(be))
    # hemisphere at b: rows from the equator towards the pole
    for al in alphas[::-1]:
        for be in betas:
            sel.append(1.0)
            axial.append(math.cos(al))
            radial_c.append(math.sin(al) * math.cos(be))
            radial_s.append(math.sin(al) * math.sin(be))
    sel.append(1.0)
    axial.append(1.0)
    radial_c.append(0.0)
    radial_s.append(0.0)
    return tuple(np.array(x) for x in (sel, axial, radial_c, radial_s))


def _reference_axes(position_sets, template: BodyTemplate) -> np.ndarray:
    """Per segment, the coordinate axis furthest from parallel in every given pose.

    One reference serves the skinned frame and its finite-difference
    neighbours, so their vertex bases match and never degenerate.
    """
    basis = np.eye(3)
    refs = np.empty((len(template.segments), 3))
    for i, (a, b, _) in enumerate(template.segments):
        worst = np.zeros(3)
        for pos in position_sets:
            d = pos[b] - pos[a]
            n = np.linalg.norm(d)
            if n > 0:
                worst = np.maximum(worst, np.abs(d) / n)
        refs[i] = basis[int(np.argmin(worst))]
    return refs


def _skin_vertices(positions, template, rings, sectors, refs) -> np.ndarray:
    sel, axial, rc, rs = _capsule_local(rings, sectors)
    out = []
    for i, (ja, jb, radius) in enumerate(template.segments):
        a, b = positions[ja], positions[jb]
        d = b - a
        length = np.linalg.norm(d)
        if not length > 1e-9:
            raise MotionValidationError(
                f"degenerate segment {i} (joints {ja}->{jb}): endpoints coincide")
        axis = d / length
        # Gram-Schmidt against a reference picked on the central frame, so
        # neighbouring frames share a continuously varying basis.
        u = refs[i] - np.dot(refs[i], axis) * axis
        u /= np.linalg.norm(u)
        w = np.cross(axis, u)
        base = a[None, :] + sel[:, None] * d[None, :]
        out.append(base + radius * (axial[:, None] * axis + rc[:, None] * u + rs[:, None] * w))
    return np.concatenate(out)


def skin_capsules(frame: JointFrame, template: BodyTemplate, rings: int = 6, sectors: int = 12,
                  prev: JointFrame | None = None, next: JointFrame | None = None) -> TriMesh:
    """Tessellate one capsule per template segment.

    Vertex velocities come from central differences against ``prev`` and
    ``next`` (one-sided when only one neighbour is given, zero with none).
    """
    if rings < 2 or sectors < 3:
        raise MotionError("capsule tessellation needs rings >= 2 and sectors >= 3")
    joints = np.asarray(frame.joints, dtype=np.float64)
    template.validate(len(joints))
    poses = [joints] + [np.asarray(f.joints, dtype=np.float64) for f in (prev, next) if f is not None]
    refs = _reference_axes(poses, template)
    verts = _skin_vertices(joints, template, rings, sectors, refs)
    topo = _capsule_topology(rings, sectors)
    nv = capsule_vertex_count(rings, sectors)
    tris = np.concatenate([topo + i * nv for i in range(len(template.segments))])

    lo = hi = None
    if prev is not None:
        lo = (prev.timestamp, _skin_vertices(np.asarray(prev.joints, float), template, rings, sectors, refs))
    if next is not None:
        hi = (next.timestamp, _skin_vertices(np.asarray(next.joints, float), template, rings, sectors, refs))
    if lo is None and hi is None:
        vel = np.zeros_like(verts)
    else:
        t0, v0 = lo if lo is not None else (frame.timestamp, verts)
        t1, v1 = hi if hi is not None else (frame.timestamp, verts)
        if not t1 > t0:
            raise MotionError("neighbouring frames must bracket the skinned frame in time")
        vel = (v1 - v0) / (t1 - t0)
    return TriMesh(verts, tris, vel)


def skin_sequence(seq: MotionSequence, template: BodyTemplate, rings: int = 6,
                  sectors: int = 12) -> list[TriMesh]:
    frames = seq.frames
    meshes = []
    for i, fr in enumerate(frames):
        prev = frames[i - 1] if i > 0 else None
        nxt = frames[i + 1] if i + 1 < len(frames) else None
        meshes.append(skin_capsules(fr, template, rings, sectors, prev, nxt))
    return meshes


# ---------------------------------------------------------------------------
# resampling

def _uniform_grid(t0: float, t1: float, fps: float) -> np.ndarray:
    period = 1.0 / fps
    if t1 - t0 < period * (1 - 1e-9):
        raise MotionError(
            f"sequence of {t1 - t0:.6g} s is shorter than one output frame ({period:.6g} s)")
    n = int(math.floor((t1 - t0) * fps + 1e-9)) + 1
    return t0 + np.arange(n) / fps


def _interp_frames(src_t: np.ndarray, src: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Linear interpolation along axis 0; exact copies where grid hits a source time."""
    out = np.empty((len(grid),) + src.shape[1:])
    idx = np.searchsorted(src_t, grid, side="left")
    for k, (t, i) in enumerate(zip(grid, idx)):
        if i < len(src_t) and abs(src_t[i] - t) <= 1e-12 * max(1.0, abs(t)):
            out[k] = src[i]
        elif i > 0 and abs(src_t[i - 1] - t) <= 1e-12 * max(1.0, abs(t)):
            out[k] = src[i - 1]
        else:
            i = min(max(i, 1), len(src_t) - 1)
            w = (t - src_t[i - 1]) / (src_t[i] - src_t[i - 1])
            out[k] = src[i - 1] + w * (src[i] - src[i - 1])
    return out


def resample(seq: MotionSequence, target_fps: float) -> MotionSequence:
    """Linearly interpolate joint positions onto a uniform ``target_fps`` grid."""
    if not target_fps > 0:
        raise MotionError("target_fps must be > 0")
    ts = seq.timestamps
    grid = _uniform_grid(float(ts[0]), float(ts[-1]), target_fps)
    return MotionSequence(grid, _interp_frames(ts, seq.positions, grid), float(target_fps),
                          seq.joint_names)


# ---------------------------------------------------------------------------
# externally produced meshes

@dataclass
class MeshSequence:
    """Per-frame meshes sharing one topology, velocities filled in on load."""

    timestamps: np.ndarray
    meshes: list[TriMesh]
    native_fps: float

    def __len__(self):
        return len(self.meshes)

    def resample(self, target_fps: float) -> "MeshSequence":
        if not target_fps > 0:
            raise MotionError("target_fps must be > 0")
        grid = _uniform_grid(float(self.timestamps[0]), float(self.timestamps[-1]), target_fps)
        verts = np.stack([m.vertices for m in self.meshes])
        new = _interp_frames(self.timestamps, verts, grid)
        tris = self.meshes[0].triangles
        return _mesh_sequence_from_vertices(grid, new, tris, float(target_fps))


def _mesh_sequence_from_vertices(ts, verts, tris, fps) -> MeshSequence:
    n = len(verts)
    if n < 2:
        raise MotionValidationError("a mesh sequence needs at least 2 frames")
    meshes = []
    for i in range(n):
        lo, hi = max(i - 1, 0), min(i + 1, n - 1)
        vel = (verts[hi] - verts[lo]) / (ts[hi] - ts[lo])
        meshes.append(TriMesh(verts[i], tris, vel))
    return MeshSequence(np.asarray(ts, dtype=float), meshes, fps)


_FRAME_RE = re.compile(r"(\d{6})\.ply$")


def load_mesh_sequence(directory, fps: float) -> MeshSequence:
    directory = Path(directory)
    if not directory.is_dir():
        raise MotionFormatError("mesh sequence directory not found", path=directory)
    if not fps > 0:
        raise MotionValidationError("fps must be > 0")
    files = []
    for p in directory.iterdir():
        m = _FRAME_RE.search(p.name)
        if m:
            files.append((int(m.group(1)), p))
    files.sort()
    if len(files) < 2:
        raise MotionValidationError(f"need at least 2 PLY frames in {directory}")
    verts, tris = [], None
    for idx, p in files:
        v, f = read_ply(p)
        if f is None:
            raise MotionFormatError("PLY frame has no faces", path=p)
        if tris is None:
            tris = f
        elif f.shape != tris.shape or not np.array_equal(f, tris):
            raise MotionValidationError(f"frame {idx} topology differs from frame {files[0][0]}")
        if len(verts) and v.shape != verts[0].shape:
            raise MotionValidationError(f"frame {idx} vertex count differs")
        verts.append(v)
    ts = np.array([i for i, _ in files], dtype=np.float64) / fps
    return _mesh_sequence_from_vertices(ts, np.stack(verts), tris, float(fps))
