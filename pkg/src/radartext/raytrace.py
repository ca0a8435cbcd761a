"""Single-bounce scatter paths from antennas to the visible body surface.

Each surface sample acts as an independent facet: it contributes one path
per RX antenna when it faces, and is unoccluded from, both the TX phase
centre and that RX. Path amplitude is ``area * cos(incidence) / d**2``
times an optional cosine-power antenna pattern.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .bvh import BVH, build_bvh
from .errors import RaytraceError
from .fmcw_config import RadarConfig, rx_positions

SHADOW_EPS = 1e-6  # m; shadow-ray origin offset along the facet normal


@dataclass(frozen=True)
class AntennaArray:
    tx_positions: np.ndarray
    rx_positions: np.ndarray

    def __post_init__(self):
        tx = np.asarray(self.tx_positions, dtype=np.float64).reshape(-1, 3)
        rx = np.asarray(self.rx_positions, dtype=np.float64).reshape(-1, 3)
        if not (np.isfinite(tx).all() and np.isfinite(rx).all()):
            raise RaytraceError("antenna positions must be finite")
        if len(tx) < 1 or len(rx) < 1:
            raise RaytraceError("need at least one TX and one RX antenna")
        object.__setattr__(self, "tx_positions", tx)
        object.__setattr__(self, "rx_positions", rx)

    @property
    def effective_tx(self) -> np.ndarray:
        """TX multiplexing is not modelled: all TX act through their phase centre."""
        return self.tx_positions.mean(axis=0)

    @classmethod
    def from_config(cls, config: RadarConfig) -> "AntennaArray":
        rx = np.array(rx_positions(config))
        # TX elements sit on x at N_rx * spacing pitch, centred on the origin.
        pitch = config.rx_count * config.rx_spacing_m
        tx = np.array([((i - (config.tx_count - 1) / 2.0) * pitch, 0.0, 0.0)
                       for i in range(config.tx_count)])
        return cls(tx, rx)

    def check(self, config: RadarConfig) -> None:
        if len(self.tx_positions) != config.tx_count or len(self.rx_positions) != config.rx_count:
            raise RaytraceError("antenna counts do not match the radar config")


class ScatterPath(NamedTuple):
    rx_index: int
    path_length_m: float
    path_rate_mps: float
    amplitude: float


@dataclass(frozen=True)
class ScatterPaths:
    """Column storage for a list of :class:`ScatterPath`, grouped by RX."""

    rx_index: np.ndarray
    path_length_m: np.ndarray
    path_rate_mps: np.ndarray
    amplitude: np.ndarray

    def __len__(self):
        return len(self.rx_index)

    def __iter__(self) -> Iterator[ScatterPath]:
        for r, d, dd, a in zip(self.rx_index, self.path_length_m, self.path_rate_mps, self.amplitude):
            yield ScatterPath(int(r), float(d), float(dd), float(a))

    @classmethod
    def from_list(cls, paths) -> "ScatterPaths":
        paths = list(paths)
        if not paths:
            return cls.empty()
        cols = list(zip(*paths))
        return cls(np.array(cols[0], dtype=np.int64), np.array(cols[1], dtype=np.float64),
                   np.array(cols[2], dtype=np.float64), np.array(cols[3], dtype=np.float64))

    @classmethod
    def empty(cls) -> "ScatterPaths":
        return cls(np.zeros(0, np.int64), np.zeros(0), np.zeros(0), np.zeros(0))

    @classmethod
    def concatenate(cls, parts) -> "ScatterPaths":
        parts = list(parts)
        if not parts:
            return cls.empty()
        return cls(*(np.concatenate([getattr(p, f) for p in parts])
                     for f in ("rx_index", "path_length_m", "path_rate_mps", "amplitude")))

    def to_csv(self) -> str:
        lines = ["rx,d,ddot,amplitude"]
        lines += [f"{p.rx_index},{p.path_length_m!r},{p.path_rate_mps!r},{p.amplitude!r}" for p in self]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SurfaceSamples:
    position: np.ndarray
    normal: np.ndarray
    area: np.ndarray
    velocity: np.ndarray

    def __len__(self):
        return len(self.area)


def sample_surface(mesh, density: float, focus=None, seed: int = 0) -> SurfaceSamples:
    """Area-weighted random facets on ``mesh``, restricted to the ``focus`` box.

    Triangle ``i`` receives ``floor(area_i * density + u_i)`` samples with
    ``u_i`` uniform, so the expected total is exactly ``area * density``.
    Random draws are laid out per triangle, which keeps samples attached to
    the same surface points across frames of one topology.
    """
    if not density > 0:
        raise RaytraceError("density must be > 0")
    areas = mesh.triangle_areas()
    if len(areas) == 0 or not areas.sum() > 0:
        raise RaytraceError("mesh has zero surface area")
    rng = np.random.default_rng(np.random.SeedSequence(_u64(seed)))
    expected = areas * density
    width = int(np.ceil(expected.max())) + 1
    u = rng.random(len(areas))
    bary = rng.random((len(areas), width, 2))
    counts = np.floor(expected + u).astype(np.int64)

    tri_idx = np.repeat(np.arange(len(areas)), counts)
    slot = np.arange(len(tri_idx)) - np.repeat(np.cumsum(counts) - counts, counts)
    r1 = np.sqrt(bary[tri_idx, slot, 0])
    r2 = bary[tri_idx, slot, 1]
    w1, w2 = (r1 * (1 - r2))[:, None], (r1 * r2)[:, None]

    tri = mesh.triangles[tri_idx]
    pv, vv = mesh.vertices, mesh.per_vertex_velocity
    # edge form keeps samples exactly on axis-aligned planes
    pos = pv[tri[:, 0]] + w1 * (pv[tri[:, 1]] - pv[tri[:, 0]]) + w2 * (pv[tri[:, 2]] - pv[tri[:, 0]])
    vel = vv[tri[:, 0]] + w1 * (vv[tri[:, 1]] - vv[tri[:, 0]]) + w2 * (vv[tri[:, 2]] - vv[tri[:, 0]])
    normal = mesh.face_normals()[tri_idx]
    area = areas[tri_idx] / counts[tri_idx]

    if focus is not None:
        lo, hi = (np.asarray(b, dtype=np.float64) for b in focus)
        keep = np.all((pos >= lo) & (pos <= hi), axis=1)
        pos, vel, normal, area = pos[keep], vel[keep], normal[keep], area[keep]
    return SurfaceSamples(pos, normal, area, vel)


def _u64(seed: int) -> int:
    return int(seed) & 0xFFFF_FFFF_FFFF_FFFF


def _visible(bvh: BVH, pos, normal, antenna) -> np.ndarray:
    to_ant = antenna[None, :] - pos
    dist = np.linalg.norm(to_ant, axis=1)
    facing = np.einsum("ij,ij->i", normal, to_ant) > 0
    out = np.zeros(len(pos), dtype=bool)
    if not facing.any():
        return out
    idx = np.flatnonzero(facing)
    origin = pos[idx] + SHADOW_EPS * normal[idx]
    dirs = antenna[None, :] - origin
    span = np.linalg.norm(dirs, axis=1)
    dirs = dirs / span[:, None]
    hit, _ = bvh.intersect(origin, dirs, 0.0, span)
    out[idx] = hit < 0
    return out


def _gain(directions: np.ndarray, exponent: float) -> np.ndarray:
    if exponent == 0:
        return np.ones(len(directions))
    # boresight is +y
    return np.maximum(0.0, directions[:, 1]) ** exponent


def trace_frame(mesh, array: AntennaArray, config: RadarConfig, density: float, seed: int,
                focus=None, gain_exponent: float = 0.0, bvh: BVH | None = None) -> ScatterPaths:
    """Scatter paths for one mesh snapshot, ordered by (rx, surface sample)."""
    array.check(config)
    if bvh is None:
        bvh = build_bvh(mesh)
    s = sample_surface(mesh, density, focus, seed)
    if len(s) == 0:
        return ScatterPaths.empty()
    tx = array.effective_tx
    vis_tx = _visible(bvh, s.position, s.normal, tx)

    tx_vec = s.position - tx
    tx_dist = np.linalg.norm(tx_vec, axis=1)
    u_tx = tx_vec / tx_dist[:, None]  # tx -> p
    cos_inc = np.maximum(0.0, -np.einsum("ij,ij->i", s.normal, u_tx))
    g_tx = _gain(u_tx, gain_exponent)

    parts = []
    for r, rx in enumerate(array.rx_positions):
        keep = vis_tx & _visible(bvh, s.position, s.normal, rx)
        idx = np.flatnonzero(keep)
        rx_vec = s.position[idx] - rx
        rx_dist = np.linalg.norm(rx_vec, axis=1)
        u_rx = rx_vec / rx_dist[:, None]  # rx -> p
        d = tx_dist[idx] + rx_dist
        ddot = np.einsum("ij,ij->i", s.velocity[idx], u_tx[idx] + u_rx)
        amp = s.area[idx] * cos_inc[idx] / d**2 * g_tx[idx] * _gain(u_rx, gain_exponent)
        parts.append(ScatterPaths(np.full(len(idx), r, dtype=np.int64), d, ddot, amp))
    return ScatterPaths.concatenate(parts)


def point_target_paths(position, velocity, config: RadarConfig, amplitude: float = 1.0,
                       array: AntennaArray | None = None) -> ScatterPaths:
    """Paths from one isotropic point scatterer to every RX (geometry only, no occlusion)."""
    array = array or AntennaArray.from_config(config)
    p = np.asarray(position, dtype=np.float64)
    v = np.asarray(velocity, dtype=np.float64)
    tx = array.effective_tx
    u_tx = (p - tx) / np.linalg.norm(p - tx)
    rows = []
    for r, rx in enumerate(array.rx_positions):
        u_rx = (p - rx) / np.linalg.norm(p - rx)
        d = np.linalg.norm(p - tx) + np.linalg.norm(p - rx)
        rows.append((r, float(d), float(np.dot(v, u_tx + u_rx)), float(amplitude)))
    return ScatterPaths.from_list(rows)
