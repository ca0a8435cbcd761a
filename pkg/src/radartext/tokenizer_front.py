"""Deterministic half of the radar tokenizer.

Anchor-grid grouping of frame clouds into per-step features, whole-trajectory
anchor masking, nearest-codebook quantization and the metric forms of the
VQ objectives (Chamfer, embedding MSE, commitment).

Grouping uses fixed neighbourhood statistics in place of a learned point
encoder; features of any width produced elsewhere can be imported through
the ``FEA1`` format and quantized the same way.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial.distance import pdist

from .errors import DimensionMismatchError, FormatError, TokenizerError

DEFAULT_RATE = 4  # temporal stride 2 x token unit 2
DEFAULT_CODEBOOK_SIZE = 512
DEFAULT_CODE_DIM = 512

FEATURE_CHANNELS = (
    "count", "dx", "dy", "dz", "v_mean", "v_std", "i_mean", "i_std", "range_offset", "occupied",
)


@dataclass(frozen=True)
class AnchorGrid:
    nx: int
    ny: int
    nz: int
    bbox: tuple[tuple[float, float, float], tuple[float, float, float]]  # (lo, hi)
    anchors: np.ndarray  # (N_g, 3), x fastest

    @property
    def size(self) -> int:
        return self.nx * self.ny * self.nz


def build_grid(bbox, nx: int, ny: int, nz: int) -> AnchorGrid:
    """Cell-centred ``nx x ny x nz`` anchors inside ``bbox = (lo, hi)``."""
    if min(nx, ny, nz) < 1:
        raise TokenizerError("grid counts must be >= 1")
    lo, hi = (np.asarray(b, dtype=np.float64) for b in bbox)
    if lo.shape != (3,) or hi.shape != (3,) or not np.all(hi > lo):
        raise TokenizerError("bbox must be (lo, hi) with hi > lo on every axis")
    axes = [lo[i] + (np.arange(n) + 0.5) * (hi[i] - lo[i]) / n for i, n in enumerate((nx, ny, nz))]
    gz, gy, gx = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
    anchors = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    return AnchorGrid(nx, ny, nz, (tuple(lo), tuple(hi)), anchors)


def template_grid(center=(0.0, 3.0, 0.0), extents=(2.0, 2.0, 2.0), n: int = 4) -> AnchorGrid:
    c, e = np.asarray(center, float), np.asarray(extents, float)
    return build_grid((c - e / 2, c + e / 2), n, n, n)


@dataclass(frozen=True)
class GroupedFeatures:
    values: np.ndarray  # (L, N_g, C)
    downsample_rate: int
    source_frames: int

    @property
    def steps(self) -> int:
        return self.values.shape[0]

    def flattened(self) -> np.ndarray:
        """Per-step vectors of width ``N_g * C``, ready for :func:`quantize`."""
        return self.values.reshape(self.values.shape[0], -1)


def _frames_xyz_v_i(clouds) -> list[np.ndarray]:
    out = []
    for c in clouds:
        pts = c.points if hasattr(c, "points") else np.asarray(c, dtype=np.float64)
        out.append(np.asarray(pts, dtype=np.float64))
    return out


def group(clouds: Sequence, grid: AnchorGrid, radius: float, rate: int = DEFAULT_RATE) -> GroupedFeatures:
    """Neighbourhood statistics per (token step, anchor).

    Each step pools ``rate`` consecutive frames. When the frame count is not a
    multiple of ``rate`` the sequence is front-padded by repeating frame 0.
    Channels, in order: point count / points in step, centroid offset from
    the anchor (x, y, z), mean and std of velocity, mean and std of
    intensity, mean range minus anchor range, occupancy flag.
    """
    if not radius > 0:
        raise TokenizerError("radius must be > 0")
    if rate < 1:
        raise TokenizerError("downsample rate must be >= 1")
    frames = _frames_xyz_v_i(clouds)
    if not frames:
        raise TokenizerError("no frames to group")
    t = len(frames)
    pad = (-t) % rate
    frames = [frames[0]] * pad + frames
    steps = len(frames) // rate
    anchors = grid.anchors
    anchor_range = np.linalg.norm(anchors, axis=1)
    feats = np.zeros((steps, len(anchors), len(FEATURE_CHANNELS)))
    r2 = radius * radius
    for s in range(steps):
        pts = np.concatenate(frames[s * rate:(s + 1) * rate], axis=0)
        if len(pts) == 0:
            continue
        # canonical order so float sums do not depend on point order
        pts = pts[np.lexsort(pts.T[::-1])]
        d2 = ((pts[None, :, :3] - anchors[:, None, :]) ** 2).sum(axis=2)  # (N_g, P)
        member = d2 <= r2
        cnt = member.sum(axis=1)
        occ = cnt > 0
        w = member / np.maximum(cnt, 1)[:, None]
        cen = w @ pts[:, :3]
        v_mean = w @ pts[:, 4]
        i_mean = w @ pts[:, 5]
        r_mean = w @ pts[:, 3]
        v_std = np.sqrt(np.maximum(w @ pts[:, 4] ** 2 - v_mean**2, 0.0))
        i_std = np.sqrt(np.maximum(w @ pts[:, 5] ** 2 - i_mean**2, 0.0))
        f = feats[s]
        f[:, 0] = cnt / len(pts)
        f[:, 1:4] = np.where(occ[:, None], cen - anchors, 0.0)
        f[:, 4] = v_mean
        f[:, 5] = v_std
        f[:, 6] = i_mean
        f[:, 7] = i_std
        f[:, 8] = np.where(occ, r_mean - anchor_range, 0.0)
        f[:, 9] = occ
    return GroupedFeatures(feats, rate, t)


@dataclass(frozen=True)
class MaskPlan:
    masked_anchor_indices: frozenset
    ratio: float
    seed: int

    def visible_indices(self, n_anchors: int) -> np.ndarray:
        return np.array([i for i in range(n_anchors) if i not in self.masked_anchor_indices], dtype=np.int64)


def mask_trajectories(features: GroupedFeatures, ratio: float = 0.5, seed: int = 0):
    """Hide ``round(ratio * N_g)`` whole anchor trajectories (round half to even).

    Returns ``(visible, plan)`` where ``visible`` has shape ``(L, N_g - masked, C)``
    and keeps the original anchor order.
    """
    if not 0 <= ratio < 1:
        raise TokenizerError("mask ratio must be in [0, 1)")
    n = features.values.shape[1]
    count = round(ratio * n)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed) & 0xFFFF_FFFF_FFFF_FFFF))
    masked = rng.choice(n, size=count, replace=False) if count else np.zeros(0, np.int64)
    plan = MaskPlan(frozenset(int(i) for i in masked), ratio, seed)
    return features.values[:, plan.visible_indices(n), :], plan


@dataclass(frozen=True)
class Codebook:
    entries: np.ndarray  # (K, D)

    def __post_init__(self):
        e = np.ascontiguousarray(self.entries, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] < 1:
            raise TokenizerError("codebook must be a non-empty (K, D) array")
        if not np.isfinite(e).all():
            raise TokenizerError("codebook entries must be finite")
        if e.shape[0] > 1 and pdist(e).min() <= 1e-12:
            raise TokenizerError("codebook has duplicate entries")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def dim(self) -> int:
        return self.entries.shape[1]


def random_codebook(k: int = DEFAULT_CODEBOOK_SIZE, dim: int = DEFAULT_CODE_DIM, seed: int = 0,
                    scale: float = 1.0) -> Codebook:
    rng = np.random.default_rng(np.random.SeedSequence(int(seed) & 0xFFFF_FFFF_FFFF_FFFF))
    return Codebook(scale * rng.standard_normal((k, dim)))


@dataclass(frozen=True)
class TokenSequence:
    ids: tuple[int, ...]
    codebook_size: int

    def __post_init__(self):
        ids = tuple(int(i) for i in self.ids)
        bad = [i for i in ids if not 0 <= i < self.codebook_size]
        if bad:
            raise TokenizerError(f"token id {bad[0]} outside [0, {self.codebook_size})")
        object.__setattr__(self, "ids", ids)

    def __len__(self):
        return len(self.ids)

    def __iter__(self):
        return iter(self.ids)


def _as_rows(features) -> np.ndarray:
    x = np.asarray(features.flattened() if isinstance(features, GroupedFeatures) else features,
                   dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise TokenizerError("features must be a (L, D) array")
    return x


def nearest_entries(features, codebook: Codebook) -> np.ndarray:
    """Index of the L2-nearest entry per row, lowest index on ties.

    Candidates are shortlisted with the expanded-norm form, then the exact
    squared distances of every candidate within rounding slack are compared.
    """
    x = _as_rows(features)
    z = codebook.entries
    if x.shape[1] != z.shape[1]:
        raise DimensionMismatchError(f"feature dim {x.shape[1]} != codebook dim {z.shape[1]}")
    if len(x) == 0:
        return np.zeros(0, dtype=np.int64)
    zz = (z * z).sum(axis=1)
    out = np.empty(len(x), dtype=np.int64)
    for s in range(0, len(x), 256):
        xb = x[s:s + 256]
        approx = zz[None, :] - 2.0 * xb @ z.T + (xb * xb).sum(axis=1)[:, None]
        best = approx.min(axis=1)
        scale = (xb * xb).sum(axis=1) + zz.max()
        slack = 1e-9 * scale + 1e-300
        for i, row in enumerate(xb):
            cand = np.flatnonzero(approx[i] <= best[i] + slack[i])
            exact = ((z[cand] - row) ** 2).sum(axis=1)
            out[s + i] = cand[np.flatnonzero(exact == exact.min())[0]]
    return out


def quantize(features, codebook: Codebook) -> TokenSequence:
    return TokenSequence(tuple(nearest_entries(features, codebook)), codebook.size)


def _sq_nn(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty(len(a))
    for s in range(0, len(a), 512):
        blk = a[s:s + 512]
        out[s:s + 512] = ((blk[:, None, :] - b[None, :, :]) ** 2).sum(axis=2).min(axis=1)
    return out


def _point_set(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or len(a) == 0:
        raise TokenizerError("point sets must be non-empty (n, dim) arrays")
    return a


def chamfer(set_a, set_b, mode: str = "single_sided") -> float:
    """Mean squared nearest-neighbour distance from ``set_a`` to ``set_b``.

    ``symmetric`` averages both directions. Sums use ``math.fsum`` so the
    result is independent of point order.
    """
    a, b = _point_set(set_a), _point_set(set_b)
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatchError("point sets differ in dimension")
    ab = math.fsum(_sq_nn(a, b)) / len(a)
    if mode == "single_sided":
        return ab
    if mode == "symmetric":
        return 0.5 * (ab + math.fsum(_sq_nn(b, a)) / len(b))
    raise TokenizerError(f"unknown chamfer mode {mode!r}")


def embedding_mse(f_all, f_mot) -> float:
    a, b = np.asarray(f_all, dtype=np.float64), np.asarray(f_mot, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shape {a.shape} != {b.shape}")
    return float(np.mean((a - b) ** 2))


def commitment_metric(f_all, codebook: Codebook) -> float:
    """Both commitment terms evaluated without stop-gradient: ``2 * sum ||f - z||^2``."""
    x = _as_rows(f_all)
    z = codebook.entries[nearest_entries(x, codebook)]
    sq = float(((x - z) ** 2).sum())
    return sq + sq


# ---------------------------------------------------------------------------
# binary formats

_HDR = struct.Struct("<4sII")


def _write_matrix(path, magic: bytes, arr: np.ndarray) -> None:
    arr = np.asarray(arr, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HDR.pack(magic, arr.shape[0], arr.shape[1]))
        fh.write(np.ascontiguousarray(arr).tobytes())


def _read_matrix(path, magic: bytes) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HDR.size or data[:4] != magic:
        raise FormatError(f"bad header: expected {magic.decode()} in {path}")
    _, rows, cols = _HDR.unpack_from(data)
    if len(data) != _HDR.size + 4 * rows * cols:
        raise FormatError(f"payload size mismatch in {path}")
    return np.frombuffer(data, dtype="<f4", offset=_HDR.size).reshape(rows, cols).astype(np.float64)


def write_codebook(codebook: Codebook, path) -> None:
    _write_matrix(path, b"CBK1", codebook.entries)


def read_codebook(path) -> Codebook:
    return Codebook(_read_matrix(path, b"CBK1"))


def write_features(features, path) -> None:
    _write_matrix(path, b"FEA1", _as_rows(features))


def read_features(path) -> np.ndarray:
    return _read_matrix(path, b"FEA1")


def write_tokens(tokens: TokenSequence, path) -> None:
    Path(path).write_text("".join(f"{i}\n" for i in tokens.ids), encoding="utf-8")


def read_tokens(path, codebook_size: int) -> TokenSequence:
    text = Path(path).read_text(encoding="utf-8")
    try:
        ids = [int(line) for line in text.split()]
    except ValueError as e:
        raise FormatError(f"token file {path}: {e}") from e
    return TokenSequence(tuple(ids), codebook_size)
