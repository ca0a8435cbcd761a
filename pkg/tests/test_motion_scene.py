import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radartext.errors import MotionError, MotionFormatError, MotionValidationError
from radartext.motion_scene import (BodyTemplate, JointFrame, MotionSequence, TriMesh,
                                    capsule_triangle_count, capsule_vertex_count, load_mesh_sequence,
                                    load_motion, resample, save_motion, skin_capsules, skin_sequence)
from radartext.plyio import read_ply, write_ply
from radartext.procedural import default_body_template, walking_motion

ONE_SEGMENT = BodyTemplate(((0, 1, 0.05),), (1.0, 1.0, 1.0))


def _write_skeleton(path, frames, fps=10.0, names=("a", "b")):
    path.write_text(json.dumps({"fps": fps, "joints": list(names), "frames": frames}))


def test_load_two_frame_skeleton(tmp_path):
    p = tmp_path / "m.json"
    _write_skeleton(p, [[[0, 3, 0], [0, 3, 1]], [[0.1, 3, 0], [0.1, 3, 1]]])
    seq = load_motion(p)
    assert len(seq) == 2
    assert seq.native_fps == 10.0
    assert seq.joint_names == ("a", "b")
    np.testing.assert_allclose(seq.timestamps, [0.0, 0.1])


def test_nan_coordinate_names_frame(tmp_path):
    p = tmp_path / "m.json"
    p.write_text('{"fps": 10, "joints": ["a"], "frames": [[[0,0,0]], [[0,NaN,0]], [[0,0,0]]]}')
    with pytest.raises(MotionValidationError, match="frame 1"):
        load_motion(p)


def test_inconsistent_joint_count(tmp_path):
    p = tmp_path / "m.json"
    _write_skeleton(p, [[[0, 0, 0], [1, 1, 1]], [[0, 0, 0]]])
    with pytest.raises(MotionValidationError, match="inconsistent joint count"):
        load_motion(p)


def test_parse_error_reports_line(tmp_path):
    p = tmp_path / "m.json"
    p.write_text('{"fps": 10,\n "joints": ["a"],\n "frames": [[[0,0,0]] oops\n}')
    with pytest.raises(MotionFormatError) as ei:
        load_motion(p)
    assert ei.value.line == 3


def test_missing_field_reported(tmp_path):
    p = tmp_path / "m.json"
    p.write_text('{"joints": ["a"], "frames": [[[0,0,0]], [[0,0,0]]]}')
    with pytest.raises(MotionFormatError) as ei:
        load_motion(p)
    assert ei.value.field == "fps"


def test_120_frames_at_20fps_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    pos = rng.normal(size=(120, 3, 3))
    seq = MotionSequence(np.arange(120) / 20.0, pos, 20.0, ("p", "q", "r"))
    save_motion(seq, tmp_path / "s.json")
    back = load_motion(tmp_path / "s.json")
    assert back.native_fps == 20
    assert back.joint_names == seq.joint_names
    np.testing.assert_array_equal(back.positions, seq.positions)
    np.testing.assert_allclose(back.timestamps, seq.timestamps, rtol=0, atol=1e-15)


def test_sequence_invariants():
    with pytest.raises(MotionValidationError):
        MotionSequence(np.array([0.0]), np.zeros((1, 1, 3)), 10.0, ("a",))
    with pytest.raises(MotionValidationError):
        MotionSequence(np.array([0.0, 0.0]), np.zeros((2, 1, 3)), 10.0, ("a",))
    with pytest.raises(MotionValidationError):
        MotionSequence(np.array([0.0, 0.1]), np.zeros((2, 1, 3)), 0.0, ("a",))


def _frame(a, b, t=0.0):
    return JointFrame(t, np.array([a, b], dtype=float))


def test_smallest_capsule():
    mesh = skin_capsules(_frame([0, 0, 0], [0, 0, 1]), ONE_SEGMENT, rings=2, sectors=3)
    assert len(mesh.triangles) > 0
    assert np.all(mesh.triangle_areas() > 0)


@pytest.mark.parametrize("rings,sectors", [(2, 3), (3, 5), (6, 12)])
def test_capsule_is_watertight_and_outward(rings, sectors):
    mesh = skin_capsules(_frame([0, 0, 0], [0.3, 0.2, 1]), ONE_SEGMENT, rings, sectors)
    assert len(mesh.vertices) == capsule_vertex_count(rings, sectors)
    assert len(mesh.triangles) == capsule_triangle_count(rings, sectors)
    edges = {}
    for tri in mesh.triangles:
        for i in range(3):
            e = (tri[i], tri[(i + 1) % 3])
            edges[e] = edges.get(e, 0) + 1
    # every directed edge appears once and its reverse once: closed, consistently wound
    assert all(c == 1 for c in edges.values())
    assert all((b, a) in edges for a, b in edges)
    # positive signed volume means outward winding
    v = mesh.vertices[mesh.triangles]
    vol = np.einsum("ij,ij->i", v[:, 0], np.cross(v[:, 1], v[:, 2])).sum() / 6
    assert vol > 0


def test_vertex_count_scales_with_segments():
    tmpl = default_body_template()
    seq = walking_motion(duration_s=0.3)
    mesh = skin_sequence(seq, tmpl, 4, 7)[0]
    assert len(mesh.vertices) == len(tmpl.segments) * capsule_vertex_count(4, 7)
    again = skin_sequence(seq, tmpl, 4, 7)[0]
    np.testing.assert_array_equal(mesh.vertices, again.vertices)


def test_degenerate_segment_named():
    tmpl = BodyTemplate(((0, 1, 0.05), (1, 1, 0.05)), (1, 1, 1))
    with pytest.raises(MotionError, match="segment 1"):
        skin_capsules(_frame([0, 0, 0], [0, 0, 1]), tmpl)


def test_identical_neighbours_give_zero_velocity():
    f = _frame([0, 3, 0], [0, 3, 1], t=0.1)
    prev = _frame([0, 3, 0], [0, 3, 1], t=0.0)
    mesh = skin_capsules(f, ONE_SEGMENT, prev=prev)
    assert np.all(mesh.per_vertex_velocity == 0)


def test_translation_gives_unit_speed():
    f0 = _frame([0, 3, 0], [0, 3, 1], t=0.0)
    f1 = _frame([0.1, 3, 0], [0.1, 3, 1], t=0.1)
    mesh = skin_capsules(f0, ONE_SEGMENT, next=f1)
    speed = np.linalg.norm(mesh.per_vertex_velocity, axis=1)
    np.testing.assert_allclose(speed, 1.0, atol=1e-9)


@given(st.tuples(*[st.floats(-2, 2)] * 3), st.floats(0.05, 0.5))
@settings(max_examples=50, deadline=None)
def test_rigid_translation_velocity(vel, dt):
    vel = np.array(vel)
    base = np.array([[0.0, 3.0, 0.0], [0.2, 3.1, 0.9]])
    tmpl = BodyTemplate(((0, 1, 0.07),), (1, 1, 1))
    prev = JointFrame(0.0, base - vel * dt)
    nxt = JointFrame(2 * dt, base + vel * dt)
    mesh = skin_capsules(JointFrame(dt, base), tmpl, 3, 6, prev, nxt)
    np.testing.assert_allclose(mesh.per_vertex_velocity, np.broadcast_to(vel, mesh.vertices.shape),
                               atol=1e-9)


def test_trimesh_rejects_sliver():
    with pytest.raises(MotionValidationError):
        TriMesh(np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]]), np.array([[0, 1, 2]]))
    with pytest.raises(MotionValidationError):
        TriMesh(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]]), np.array([[0, 1, 3]]))


def _seq(fps, n, j=2, seed=0):
    rng = np.random.default_rng(seed)
    return MotionSequence(np.arange(n) / fps, rng.normal(size=(n, j, 3)), fps, tuple(f"j{i}" for i in range(j)))


def test_resample_identity():
    s = _seq(10.0, 30)
    r = resample(s, 10.0)
    np.testing.assert_array_equal(r.positions, s.positions)


def test_resample_decimation():
    s = _seq(20.0, 41)
    r = resample(s, 10.0)
    assert len(r) == 21
    np.testing.assert_array_equal(r.positions, s.positions[::2])


def test_resample_linear_midpoint():
    s = MotionSequence(np.array([0.0, 1.0]), np.array([[[0, 0, 0]], [[1, 0, 0]]], float), 1.0, ("a",))
    r = resample(s, 10.0)
    assert len(r) == 11
    assert r.positions[5, 0, 0] == pytest.approx(0.5)
    assert abs(r.duration - s.duration) <= 0.1


def test_resample_too_short():
    s = MotionSequence(np.array([0.0, 0.05]), np.zeros((2, 1, 3)), 20.0, ("a",))
    with pytest.raises(MotionError):
        resample(s, 10.0)


@given(st.sampled_from([7.0, 10.0, 24.0, 30.0]), st.sampled_from([5.0, 10.0, 13.0]),
       st.integers(20, 60))
@settings(max_examples=30, deadline=None)
def test_resample_idempotent(native, target, n):
    once = resample(_seq(native, n), target)
    twice = resample(once, target)
    np.testing.assert_array_equal(once.timestamps, twice.timestamps)
    np.testing.assert_array_equal(once.positions, twice.positions)
    assert abs(once.duration - _seq(native, n).duration) <= 1 / target


def test_mesh_sequence_directory(tmp_path):
    tmpl = default_body_template()
    seq = walking_motion(duration_s=0.4, fps=20.0)
    meshes = skin_sequence(seq, tmpl, 3, 6)
    for i, m in enumerate(meshes):
        write_ply(tmp_path / f"frame_{i:06d}.ply", m.vertices, m.triangles)
    v, f = read_ply(tmp_path / "frame_000000.ply")
    np.testing.assert_array_equal(f, meshes[0].triangles)
    np.testing.assert_allclose(v, meshes[0].vertices, atol=1e-6)
    ms = load_mesh_sequence(tmp_path, fps=20.0)
    assert len(ms) == len(meshes)
    down = ms.resample(10.0)
    assert len(down) == (len(meshes) + 1) // 2
    np.testing.assert_array_equal(down.meshes[1].vertices, ms.meshes[2].vertices)
    assert np.isfinite(down.meshes[0].per_vertex_velocity).all()
    via_loader = load_motion(tmp_path, "mesh_sequence", fps=20.0)
    assert len(via_loader) == len(meshes)


def test_neighbour_parallel_to_reference_axis_stays_finite():
    # the segment is vertical in the previous frame and tilted in the skinned one
    tmpl = BodyTemplate(((0, 1, 0.05),), (1, 1, 1))
    prev = _frame([0, 3, 0], [0, 3, -0.4], t=0.0)
    cur = _frame([0, 3, 0], [0, 3.3, -0.25], t=0.1)
    mesh = skin_capsules(cur, tmpl, 4, 7, prev=prev)
    assert np.isfinite(mesh.per_vertex_velocity).all()
