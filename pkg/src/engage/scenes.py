"""Synthetic scenes and procedurally generated motion clips.

The bundled clips under ``data/clips`` are generated by :func:`clip_bvh`;
they are stand-ins for boxing, rowing, swimming and frisbee motion capture,
not recordings.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .skeleton import PosePosition

FPS = 30.0

# (name, parent, offset in cm, channels) for a Y-up humanoid in T-pose
_ROT = "Zrotation Yrotation Xrotation"
HUMANOID = [
    ("Hips", None, (0.0, 95.0, 0.0), "Xposition Yposition Zposition " + _ROT),
    ("Spine", "Hips", (0.0, 10.0, 0.0), _ROT),
    ("Spine1", "Spine", (0.0, 20.0, 0.0), _ROT),
    ("Neck", "Spine1", (0.0, 20.0, 0.0), _ROT),
    ("Head", "Neck", (0.0, 10.0, 0.0), _ROT),
    ("LeftShoulder", "Spine1", (5.0, 17.0, 0.0), _ROT),
    ("LeftArm", "LeftShoulder", (15.0, 0.0, 0.0), _ROT),
    ("LeftForeArm", "LeftArm", (28.0, 0.0, 0.0), _ROT),
    ("LeftHand", "LeftForeArm", (25.0, 0.0, 0.0), _ROT),
    ("RightShoulder", "Spine1", (-5.0, 17.0, 0.0), _ROT),
    ("RightArm", "RightShoulder", (-15.0, 0.0, 0.0), _ROT),
    ("RightForeArm", "RightArm", (-28.0, 0.0, 0.0), _ROT),
    ("RightHand", "RightForeArm", (-25.0, 0.0, 0.0), _ROT),
    ("LeftUpLeg", "Hips", (9.0, -5.0, 0.0), _ROT),
    ("LeftLeg", "LeftUpLeg", (0.0, -42.0, 0.0), _ROT),
    ("LeftFoot", "LeftLeg", (0.0, -40.0, 0.0), _ROT),
    ("LeftToeBase", "LeftFoot", (0.0, -5.0, 12.0), _ROT),
    ("RightUpLeg", "Hips", (-9.0, -5.0, 0.0), _ROT),
    ("RightLeg", "RightUpLeg", (0.0, -42.0, 0.0), _ROT),
    ("RightFoot", "RightLeg", (0.0, -40.0, 0.0), _ROT),
    ("RightToeBase", "RightFoot", (0.0, -5.0, 12.0), _ROT),
]
END_SITES = {
    "Head": (0.0, 12.0, 0.0),
    "LeftHand": (8.0, 0.0, 0.0),
    "RightHand": (-8.0, 0.0, 0.0),
    "LeftToeBase": (0.0, 0.0, 5.0),
    "RightToeBase": (0.0, 0.0, 5.0),
}

# 20 joints for attention demos and throughput checks
TRACKED_20 = (
    "Hips", "Spine1", "Neck", "Head", "Head_End",
    "LeftArm", "LeftForeArm", "LeftHand", "LeftHand_End",
    "RightArm", "RightForeArm", "RightHand", "RightHand_End",
    "LeftLeg", "LeftFoot", "LeftToeBase",
    "RightLeg", "RightFoot", "RightToeBase", "RightUpLeg",
)

KINDS = ("boxing", "rowing", "swimming", "frisbee")


def _motion(kind: str, t: np.ndarray, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Per-joint (Z, Y, X) angles in degrees, shape (frames, 3)."""
    n = len(t)
    z = np.zeros(n)
    ang = {name: np.zeros((n, 3)) for name, *_ in HUMANOID}
    root_pos = np.zeros((n, 3))
    w = 2 * math.pi
    jitter = lambda s: s * rng.standard_normal(n).cumsum() / math.sqrt(n)

    if kind == "boxing":
        f = 1.2
        jab_l = np.clip(np.sin(w * f * t), 0, None) ** 2
        jab_r = np.clip(np.sin(w * f * t + math.pi), 0, None) ** 2
        ang["LeftArm"][:] = np.stack([-70 + 60 * jab_l, -60 + 50 * jab_l, z], 1)
        ang["LeftForeArm"][:] = np.stack([z, -110 + 100 * jab_l, z], 1)
        ang["RightArm"][:] = np.stack([70 - 60 * jab_r, 60 - 50 * jab_r, z], 1)
        ang["RightForeArm"][:] = np.stack([z, 110 - 100 * jab_r, z], 1)
        ang["Spine1"][:] = np.stack([z, 15 * (jab_l - jab_r), z], 1)
        root_pos[:, 0] = 5 * np.sin(w * 0.3 * t) + jitter(3)
        root_pos[:, 1] = 2 * np.sin(w * 2 * f * t)
    elif kind == "rowing":
        f = 0.5
        s = np.sin(w * f * t)
        ang["Spine"][:] = np.stack([z, z, 25 * s], 1)
        ang["LeftArm"][:] = np.stack([-60 + 10 * s, -40 * s, z], 1)
        ang["RightArm"][:] = np.stack([60 - 10 * s, 40 * s, z], 1)
        ang["LeftForeArm"][:] = np.stack([z, -60 - 50 * s, z], 1)
        ang["RightForeArm"][:] = np.stack([z, 60 + 50 * s, z], 1)
        for side in ("Left", "Right"):
            ang[f"{side}UpLeg"][:] = np.stack([z, z, -60 - 40 * s], 1)
            ang[f"{side}Leg"][:] = np.stack([z, z, 80 + 60 * s], 1)
        root_pos[:, 1] = -45 + jitter(1)
    elif kind == "swimming":
        f = 0.7
        ph = w * f * t
        ang["LeftArm"][:] = np.stack([20 * np.cos(ph), 30 * np.sin(ph), 170 * np.sin(ph)], 1)
        ang["RightArm"][:] = np.stack([-20 * np.cos(ph), -30 * np.sin(ph), 170 * np.sin(ph + math.pi)], 1)
        ang["LeftForeArm"][:] = np.stack([z, -30 - 20 * np.sin(ph), z], 1)
        ang["RightForeArm"][:] = np.stack([z, 30 + 20 * np.sin(ph), z], 1)
        ang["LeftUpLeg"][:] = np.stack([z, z, 20 * np.sin(4 * ph)], 1)
        ang["RightUpLeg"][:] = np.stack([z, z, -20 * np.sin(4 * ph)], 1)
        ang["Hips"][:] = np.stack([z, 10 * np.sin(ph), 80 + z], 1)
        root_pos[:, 2] = 30 * t + jitter(2)
    elif kind == "frisbee":
        f = 0.4
        ph = (t * f) % 1.0
        throw = np.where(ph < 0.7, ph / 0.7, 1.0 - (ph - 0.7) / 0.3)
        snap = np.exp(-((ph - 0.7) / 0.04) ** 2)
        ang["Spine1"][:] = np.stack([z, -50 + 90 * throw, z], 1)
        ang["RightArm"][:] = np.stack([20 - 10 * throw, -80 + 140 * throw, z], 1)
        ang["RightForeArm"][:] = np.stack([z, 90 * (1 - throw) + 40 * snap, z], 1)
        ang["RightHand"][:] = np.stack([z, 60 * snap, z], 1)
        ang["LeftArm"][:] = np.stack([-40 + 10 * throw, 30 * throw, z], 1)
        root_pos[:, 0] = 10 * throw + jitter(1)
    else:
        raise ValueError(f"unknown clip kind {kind!r}; expected one of {KINDS}")
    ang["_root_pos"] = root_pos
    return ang


def clip_bvh(kind: str, seconds: float = 4.0, fps: float = FPS, seed: int = 0) -> str:
    """BVH text (meters, degrees) for a procedurally generated humanoid clip."""
    rng = np.random.default_rng(seed)
    n = int(round(seconds * fps))
    t = np.arange(n) / fps
    ang = _motion(kind, t, rng)

    children: dict[str | None, list] = {}
    for name, parent, off, ch in HUMANOID:
        children.setdefault(parent, []).append((name, off, ch))
    lines = ["HIERARCHY"]

    def emit(name, off, ch, depth):
        pad = "\t" * depth
        kw = "ROOT" if depth == 0 else "JOINT"
        lines.append(f"{pad}{kw} {name}")
        lines.append(pad + "{")
        lines.append(f"{pad}\tOFFSET {off[0] / 100:.6f} {off[1] / 100:.6f} {off[2] / 100:.6f}")
        lines.append(f"{pad}\tCHANNELS {len(ch.split())} {ch}")
        for c in children.get(name, []):
            emit(*c, depth + 1)
        if name in END_SITES:
            e = END_SITES[name]
            lines.append(f"{pad}\tEnd Site")
            lines.append(f"{pad}\t{{")
            lines.append(f"{pad}\t\tOFFSET {e[0] / 100:.6f} {e[1] / 100:.6f} {e[2] / 100:.6f}")
            lines.append(f"{pad}\t}}")
        lines.append(pad + "}")

    emit(*children[None][0], 0)
    lines += ["MOTION", f"Frames: {n}", f"Frame Time: {1.0 / fps!r}"]
    for k in range(n):
        row = list(ang["_root_pos"][k] / 100)
        for name, *_ in HUMANOID:
            row.extend(ang[name][k])
        lines.append(" ".join(f"{v:.6f}" for v in row))
    return "\n".join(lines) + "\n"


def bundled_clips() -> dict[str, Path]:
    d = Path(__file__).parent / "data" / "clips"
    return {p.stem: p for p in sorted(d.glob("*.bvh"))}


def three_joint_scene(frames: int = 121, speed: float = 0.05,
                      names=("j1", "j2", "j3")) -> list[PosePosition]:
    """Two static joints and one moving ``speed`` m/frame along +x."""
    out = []
    for k in range(frames):
        t = k / FPS
        out.append(PosePosition({
            names[0]: np.array([0.0, 0.0, 1.0]),
            names[1]: np.array([0.5, 0.0, 1.0]),
            names[2]: np.array([-0.5 + speed * k, 0.3, 1.0]),
        }, t))
    return out


def static_scene(frames: int = 100, joints: int = 3) -> list[PosePosition]:
    base = {f"j{i + 1}": np.array([0.4 * i, 0.0, 1.0]) for i in range(joints)}
    return [PosePosition(dict(base), k / FPS) for k in range(frames)]


def jittered(scene: list[PosePosition], amplitude: float, seed: int = 0) -> list[PosePosition]:
    """Add i.i.d. uniform noise in [-amplitude, amplitude] to every coordinate."""
    rng = np.random.default_rng(seed)
    out = []
    for pose in scene:
        out.append(PosePosition(
            {j: p + rng.uniform(-amplitude, amplitude, 3) for j, p in pose.positions.items()},
            pose.timestamp))
    return out
