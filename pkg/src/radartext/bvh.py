"""Bounding-volume hierarchy over triangles with exact first-hit queries.

Build is a median split on triangle centroids (longest axis); traversal is
a numba kernel. A brute-force kernel with identical intersection arithmetic
is kept alongside for verification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import RaytraceError

LEAF_SIZE = 4
_DET_EPS = 1e-15


@dataclass(frozen=True)
class BVH:
    v0: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    node_lo: np.ndarray
    node_hi: np.ndarray
    node_left: np.ndarray   # child index, -1 for leaves
    node_right: np.ndarray
    node_start: np.ndarray  # into tri_order
    node_count: np.ndarray
    tri_order: np.ndarray

    @property
    def triangle_count(self) -> int:
        return len(self.v0)

    def intersect(self, origins, directions, t_min=0.0, t_max=np.inf):
        """First hit per ray: ``(triangle index or -1, t or inf)``.

        Ties at equal ``t`` resolve to the lowest triangle index.
        """
        o, d, tmin, tmax = _ray_args(origins, directions, t_min, t_max)
        return _traverse(o, d, tmin, tmax, self.v0, self.e1, self.e2, self.node_lo, self.node_hi,
                         self.node_left, self.node_right, self.node_start, self.node_count,
                         self.tri_order)


def _ray_args(origins, directions, t_min, t_max):
    o = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
    d = np.ascontiguousarray(directions, dtype=np.float64).reshape(-1, 3)
    if o.shape != d.shape:
        raise RaytraceError("origins and directions must have the same shape")
    tmin = np.ascontiguousarray(np.broadcast_to(np.asarray(t_min, dtype=np.float64), (len(o),)))
    tmax = np.ascontiguousarray(np.broadcast_to(np.asarray(t_max, dtype=np.float64), (len(o),)))
    return o, d, tmin, tmax


def build_bvh(mesh) -> BVH:
    tris = np.asarray(mesh.triangles, dtype=np.int64)
    if len(tris) == 0:
        raise RaytraceError("cannot build a BVH over an empty mesh")
    verts = np.asarray(mesh.vertices, dtype=np.float64)
    p = verts[tris]
    v0 = np.ascontiguousarray(p[:, 0])
    e1 = np.ascontiguousarray(p[:, 1] - p[:, 0])
    e2 = np.ascontiguousarray(p[:, 2] - p[:, 0])
    tri_lo, tri_hi = p.min(axis=1), p.max(axis=1)
    cent = p.mean(axis=1)

    order = np.arange(len(tris))
    lo, hi, left, right, start, count = [], [], [], [], [], []
    # (node id, start, end) work list; children always get larger ids
    stack = [(0, 0, len(tris))]
    lo.append(None); hi.append(None); left.append(-1); right.append(-1); start.append(0); count.append(0)
    while stack:
        node, s, e = stack.pop()
        idx = order[s:e]
        blo, bhi = tri_lo[idx].min(axis=0), tri_hi[idx].max(axis=0)
        pad = 1e-9 * (1.0 + np.abs(blo).max(initial=0.0) + np.abs(bhi).max(initial=0.0))
        lo[node], hi[node] = blo - pad, bhi + pad
        if e - s <= LEAF_SIZE:
            start[node], count[node] = s, e - s
            continue
        c = cent[idx]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        mid = (e - s) // 2
        part = np.argpartition(c[:, axis], mid, kind="introselect")
        order[s:e] = idx[part]
        for child_s, child_e, slot in ((s, s + mid, left), (s + mid, e, right)):
            cid = len(lo)
            lo.append(None); hi.append(None); left.append(-1); right.append(-1)
            start.append(0); count.append(0)
            slot[node] = cid
            stack.append((cid, child_s, child_e))
    return BVH(v0, e1, e2, np.array(lo), np.array(hi), np.array(left, dtype=np.int64),
               np.array(right, dtype=np.int64), np.array(start, dtype=np.int64),
               np.array(count, dtype=np.int64), order.astype(np.int64))


@numba.njit(cache=True, nogil=True)
def _hit(ox, oy, oz, dx, dy, dz, v0, e1, e2, i):
    # Moller-Trumbore; returns inf on a miss
    px = dy * e2[i, 2] - dz * e2[i, 1]
    py = dz * e2[i, 0] - dx * e2[i, 2]
    pz = dx * e2[i, 1] - dy * e2[i, 0]
    det = e1[i, 0] * px + e1[i, 1] * py + e1[i, 2] * pz
    if abs(det) < _DET_EPS:
        return np.inf
    inv = 1.0 / det
    tx = ox - v0[i, 0]
    ty = oy - v0[i, 1]
    tz = oz - v0[i, 2]
    u = (tx * px + ty * py + tz * pz) * inv
    if u < 0.0 or u > 1.0:
        return np.inf
    qx = ty * e1[i, 2] - tz * e1[i, 1]
    qy = tz * e1[i, 0] - tx * e1[i, 2]
    qz = tx * e1[i, 1] - ty * e1[i, 0]
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return np.inf
    return (e2[i, 0] * qx + e2[i, 1] * qy + e2[i, 2] * qz) * inv


@numba.njit(cache=True, nogil=True)
def _traverse(o, d, tmin, tmax, v0, e1, e2, nlo, nhi, nleft, nright, nstart, ncount, order):
    n = o.shape[0]
    hit_idx = np.full(n, -1, dtype=np.int64)
    hit_t = np.full(n, np.inf)
    stack = np.empty(128, dtype=np.int64)
    for r in range(n):
        ox, oy, oz = o[r, 0], o[r, 1], o[r, 2]
        dx, dy, dz = d[r, 0], d[r, 1], d[r, 2]
        ix = 1.0 / dx if dx != 0.0 else np.inf
        iy = 1.0 / dy if dy != 0.0 else np.inf
        iz = 1.0 / dz if dz != 0.0 else np.inf
        best_t = tmax[r]
        best_i = -1
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0:
            sp -= 1
            nd = stack[sp]
            # slab test; 0 * inf yields nan and is treated as "inside" on that axis
            t0 = tmin[r]
            t1 = best_t
            ok = True
            for ax in range(3):
                oa = ox if ax == 0 else (oy if ax == 1 else oz)
                ia = ix if ax == 0 else (iy if ax == 1 else iz)
                da = dx if ax == 0 else (dy if ax == 1 else dz)
                if da == 0.0:
                    if oa < nlo[nd, ax] or oa > nhi[nd, ax]:
                        ok = False
                        break
                    continue
                ta = (nlo[nd, ax] - oa) * ia
                tb = (nhi[nd, ax] - oa) * ia
                if ta > tb:
                    ta, tb = tb, ta
                if ta > t0:
                    t0 = ta
                if tb < t1:
                    t1 = tb
                if t0 > t1:
                    ok = False
                    break
            if not ok:
                continue
            if ncount[nd] > 0:
                for k in range(nstart[nd], nstart[nd] + ncount[nd]):
                    ti = order[k]
                    t = _hit(ox, oy, oz, dx, dy, dz, v0, e1, e2, ti)
                    if t > tmin[r] and t <= tmax[r] and t < np.inf:
                        if t < best_t or (t == best_t and (best_i < 0 or ti < best_i)):
                            best_t = t
                            best_i = ti
            else:
                if sp + 2 > stack.shape[0]:
                    grown = np.empty(stack.shape[0] * 2, dtype=np.int64)
                    grown[:sp] = stack[:sp]
                    stack = grown
                stack[sp] = nright[nd]
                sp += 1
                stack[sp] = nleft[nd]
                sp += 1
        hit_idx[r] = best_i
        hit_t[r] = best_t if best_i >= 0 else np.inf
    return hit_idx, hit_t


@numba.njit(cache=True, nogil=True)
def _brute(o, d, tmin, tmax, v0, e1, e2):
    n = o.shape[0]
    hit_idx = np.full(n, -1, dtype=np.int64)
    hit_t = np.full(n, np.inf)
    for r in range(n):
        best_t = tmax[r]
        best_i = -1
        for i in range(v0.shape[0]):
            t = _hit(o[r, 0], o[r, 1], o[r, 2], d[r, 0], d[r, 1], d[r, 2], v0, e1, e2, i)
            if t > tmin[r] and t <= tmax[r] and t < np.inf and (t < best_t or (t == best_t and best_i < 0)):
                best_t = t
                best_i = i
        hit_idx[r] = best_i
        hit_t[r] = best_t if best_i >= 0 else np.inf
    return hit_idx, hit_t


def brute_force_intersect(mesh, origins, directions, t_min=0.0, t_max=np.inf):
    """Reference first-hit query iterating every triangle."""
    tris = np.asarray(mesh.triangles, dtype=np.int64)
    p = np.asarray(mesh.vertices, dtype=np.float64)[tris]
    v0 = np.ascontiguousarray(p[:, 0])
    e1 = np.ascontiguousarray(p[:, 1] - p[:, 0])
    e2 = np.ascontiguousarray(p[:, 2] - p[:, 0])
    o, d, tmin, tmax = _ray_args(origins, directions, t_min, t_max)
    return _brute(o, d, tmin, tmax, v0, e1, e2)
