"""Small scene builders shared by the tests."""

from __future__ import annotations

import numpy as np

from radartext.motion_scene import TriMesh


def facet(center, size=0.1, velocity=(0.0, 0.0, 0.0)) -> TriMesh:
    """Square facet at ``center`` whose normal points back at the origin."""
    c = np.asarray(center, dtype=float)
    n = -c / np.linalg.norm(c)
    a = np.cross(n, [0.0, 0.0, 1.0])
    if np.linalg.norm(a) < 1e-9:
        a = np.cross(n, [1.0, 0.0, 0.0])
    a /= np.linalg.norm(a)
    b = np.cross(n, a)
    h = size / 2
    verts = np.array([c - h * a - h * b, c + h * a - h * b, c + h * a + h * b, c - h * a + h * b])
    tris = np.array([[0, 1, 2], [0, 2, 3]])
    mesh = TriMesh(verts, tris, np.tile(velocity, (4, 1)))
    if np.dot(mesh.face_normals()[0], n) < 0:
        mesh = TriMesh(verts, tris[:, ::-1], np.tile(velocity, (4, 1)))
    return mesh


def box(lo, hi) -> TriMesh:
    """Closed axis-aligned box with outward normals."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    v = np.array([[x, y, z] for z in (lo[2], hi[2]) for y in (lo[1], hi[1]) for x in (lo[0], hi[0])])
    quads = [(0, 2, 3, 1), (4, 5, 7, 6), (0, 1, 5, 4), (2, 6, 7, 3), (0, 4, 6, 2), (1, 3, 7, 5)]
    tris = []
    for a, b, c, d in quads:
        tris += [(a, b, c), (a, c, d)]
    return TriMesh(v, np.array(tris))


def unit_square(z=0.0) -> TriMesh:
    v = np.array([[0, 0, z], [1, 0, z], [1, 1, z], [0, 1, z]], dtype=float)
    return TriMesh(v, np.array([[0, 1, 2], [0, 2, 3]]))
