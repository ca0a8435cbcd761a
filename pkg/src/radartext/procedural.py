"""Procedural skeletons for tests, demos and quick corpora.

The subject stands ``distance`` metres in front of the radar (along +y),
facing it, with the radar mounted about 1 m above the floor.
"""

from __future__ import annotations

import math

import numpy as np

from .motion_scene import BodyTemplate, MotionSequence

JOINT_NAMES = (
    "pelvis", "spine", "neck", "head",
    "l_shoulder", "l_elbow", "l_wrist",
    "r_shoulder", "r_elbow", "r_wrist",
    "l_hip", "l_knee", "l_ankle",
    "r_hip", "r_knee", "r_ankle",
)
J = {n: i for i, n in enumerate(JOINT_NAMES)}

# rest pose relative to the pelvis; z up, subject faces -y (towards the radar)
REST_POSE = {
    "pelvis": (0.0, 0.0, 0.0),
    "spine": (0.0, 0.0, 0.25),
    "neck": (0.0, 0.0, 0.50),
    "head": (0.0, 0.0, 0.68),
    "l_shoulder": (-0.19, 0.0, 0.46),
    "l_elbow": (-0.23, 0.0, 0.18),
    "l_wrist": (-0.25, 0.0, -0.07),
    "r_shoulder": (0.19, 0.0, 0.46),
    "r_elbow": (0.23, 0.0, 0.18),
    "r_wrist": (0.25, 0.0, -0.07),
    "l_hip": (-0.10, 0.0, -0.05),
    "l_knee": (-0.10, 0.0, -0.48),
    "l_ankle": (-0.10, 0.0, -0.90),
    "r_hip": (0.10, 0.0, -0.05),
    "r_knee": (0.10, 0.0, -0.48),
    "r_ankle": (0.10, 0.0, -0.90),
}

PELVIS_HEIGHT = 0.0  # radar height == pelvis height


def default_body_template() -> BodyTemplate:
    seg = [
        ("pelvis", "spine", 0.14), ("spine", "neck", 0.15), ("neck", "head", 0.10),
        ("l_shoulder", "r_shoulder", 0.06),
        ("l_shoulder", "l_elbow", 0.05), ("l_elbow", "l_wrist", 0.04),
        ("r_shoulder", "r_elbow", 0.05), ("r_elbow", "r_wrist", 0.04),
        ("l_hip", "r_hip", 0.09),
        ("l_hip", "l_knee", 0.075), ("l_knee", "l_ankle", 0.055),
        ("r_hip", "r_knee", 0.075), ("r_knee", "r_ankle", 0.055),
    ]
    return BodyTemplate(tuple((J[a], J[b], r) for a, b, r in seg), (0.8, 0.5, 1.9))


def _rest(distance: float) -> np.ndarray:
    p = np.array([REST_POSE[n] for n in JOINT_NAMES], dtype=np.float64)
    p[:, 1] += distance
    p[:, 2] += PELVIS_HEIGHT
    return p


def _swing(pose: np.ndarray, pivot: str, chain: tuple[str, ...], angle: float) -> None:
    """Rotate joints in ``chain`` about the x axis through ``pivot`` (in place)."""
    c, s = math.cos(angle), math.sin(angle)
    o = pose[J[pivot]].copy()
    for name in chain:
        d = pose[J[name]] - o
        pose[J[name]] = o + (d[0], c * d[1] - s * d[2], s * d[1] + c * d[2])


def _timeline(duration_s: float, fps: float) -> np.ndarray:
    n = int(round(duration_s * fps))
    return np.arange(max(n, 2)) / fps


def static_motion(duration_s: float = 3.0, fps: float = 10.0, distance: float = 3.0) -> MotionSequence:
    ts = _timeline(duration_s, fps)
    pos = np.repeat(_rest(distance)[None], len(ts), axis=0)
    return MotionSequence(ts, pos, fps, JOINT_NAMES)


def swinging_legs_motion(duration_s: float = 3.0, fps: float = 10.0, distance: float = 3.0,
                         amplitude_deg: float = 30.0, cadence_hz: float = 1.0) -> MotionSequence:
    """Both legs swing in antiphase about the hips; torso and arms stay still."""
    ts = _timeline(duration_s, fps)
    amp = math.radians(amplitude_deg)
    frames = []
    for t in ts:
        pose = _rest(distance)
        ph = 2 * math.pi * cadence_hz * t
        _swing(pose, "l_hip", ("l_knee", "l_ankle"), amp * math.sin(ph))
        _swing(pose, "r_hip", ("r_knee", "r_ankle"), -amp * math.sin(ph))
        frames.append(pose)
    return MotionSequence(ts, np.stack(frames), fps, JOINT_NAMES)


def walking_motion(duration_s: float = 9.0, fps: float = 10.0, distance: float = 3.0,
                   speed_mps: float = 0.0, cadence_hz: float = 0.9) -> MotionSequence:
    """Gait with leg swing, knee flexion, counter-swinging arms and vertical bob.

    ``speed_mps`` > 0 walks towards the radar; 0 walks in place.
    """
    ts = _timeline(duration_s, fps)
    hip_amp, knee_amp, arm_amp = math.radians(25), math.radians(35), math.radians(20)
    frames = []
    for t in ts:
        ph = 2 * math.pi * cadence_hz * t
        pose = _rest(distance - speed_mps * t)
        for side, sign in (("l", 1.0), ("r", -1.0)):
            hip = sign * hip_amp * math.sin(ph)
            _swing(pose, f"{side}_hip", (f"{side}_knee", f"{side}_ankle"), hip)
            # knee bends backwards (away from the radar) during the swing phase
            bend = knee_amp * max(0.0, math.sin(ph + sign * math.pi / 2 + math.pi / 2))
            _swing(pose, f"{side}_knee", (f"{side}_ankle",), -bend)
            _swing(pose, f"{side}_shoulder", (f"{side}_elbow", f"{side}_wrist"), -sign * arm_amp * math.sin(ph))
        pose[:, 2] += 0.02 * math.cos(2 * ph)
        frames.append(pose)
    return MotionSequence(ts, np.stack(frames), fps, JOINT_NAMES)


MOTIONS = {
    "static": static_motion,
    "swing": swinging_legs_motion,
    "walk": walking_motion,
}
