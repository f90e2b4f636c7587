"""Rigid transforms, rotations and roll/pitch/yaw conversion.

Conventions
-----------
* ``Transform3`` maps points from a child frame into its parent frame:
  ``p_parent = R @ p_child + t``.
* ``compose(a, b)`` is the homogeneous product ``a @ b``: ``b`` is applied
  first, then ``a``.
* Euler angles are extrinsic about fixed x, y, z axes, applied roll first,
  then pitch, then yaw: ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import GimbalLockWarning

# |pitch| closer than this to pi/2 is treated as gimbal lock
GIMBAL_TOLERANCE = 1e-6


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Transform3:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "rotation", _frozen(r))
        object.__setattr__(self, "translation", _frozen(t))

    @classmethod
    def from_matrix(cls, m) -> Transform3:
        m = np.asarray(m, dtype=float)
        return cls(m[:3, :3], m[:3, 3])

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def __matmul__(self, other: Transform3) -> Transform3:
        return compose(self, other)

    def allclose(self, other: Transform3, atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, rtol=0, atol=atol)
            and np.allclose(self.translation, other.translation, rtol=0, atol=atol)
        )

    def __repr__(self) -> str:
        return f"Transform3(rotation={self.rotation.tolist()}, translation={self.translation.tolist()})"


class EulerAngles(NamedTuple):
    roll: float
    pitch: float
    yaw: float


IDENTITY = Transform3()


def identity() -> Transform3:
    return IDENTITY


def translate(x: float, y: float, z: float) -> Transform3:
    return Transform3(np.eye(3), (x, y, z))


def rot_x(angle: float) -> Transform3:
    c, s = math.cos(angle), math.sin(angle)
    return Transform3(((1.0, 0.0, 0.0), (0.0, c, -s), (0.0, s, c)))


def rot_y(angle: float) -> Transform3:
    c, s = math.cos(angle), math.sin(angle)
    return Transform3(((c, 0.0, s), (0.0, 1.0, 0.0), (-s, 0.0, c)))


def rot_z(angle: float) -> Transform3:
    c, s = math.cos(angle), math.sin(angle)
    return Transform3(((c, -s, 0.0), (s, c, 0.0), (0.0, 0.0, 1.0)))


def compose(a: Transform3, b: Transform3) -> Transform3:
    return Transform3(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def invert(t: Transform3) -> Transform3:
    rt = t.rotation.T
    return Transform3(rt, -(rt @ t.translation))


def apply(t: Transform3, p: Sequence[float]) -> np.ndarray:
    """Rotate then translate a point."""
    return t.rotation @ np.asarray(p, dtype=float) + t.translation


def is_rotation(r, atol: float = 1e-9) -> bool:
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3) or not np.all(np.isfinite(r)):
        return False
    return bool(np.allclose(r.T @ r, np.eye(3), rtol=0, atol=atol)
                and abs(np.linalg.det(r) - 1.0) <= atol)


def orthonormalize(r) -> np.ndarray:
    """Nearest rotation matrix in the Frobenius sense."""
    u, _, vt = np.linalg.svd(np.asarray(r, dtype=float))
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def wrap_angle(a: float) -> float:
    """Map an angle into (-pi, pi]."""
    a = math.remainder(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    return a


def euler_to_rotation(e: EulerAngles | Sequence[float]) -> Transform3:
    roll, pitch, yaw = e
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return Transform3((
        (cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr),
        (sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr),
        (-sp, cp * sr, cp * cr),
    ))


def euler_with_flag(t: Transform3 | np.ndarray) -> tuple[EulerAngles, bool]:
    """Decompose a rotation into roll/pitch/yaw and report gimbal lock.

    At gimbal lock only ``roll - yaw`` (pitch = +pi/2) or ``roll + yaw``
    (pitch = -pi/2) is observable; yaw is pinned to 0 and roll carries the
    whole residual so the result stays deterministic.
    """
    r = t.rotation if isinstance(t, Transform3) else np.asarray(t, dtype=float)
    pitch = math.atan2(-r[2, 0], math.hypot(r[0, 0], r[1, 0]))
    if abs(abs(pitch) - math.pi / 2) < GIMBAL_TOLERANCE:
        if pitch > 0:
            roll = math.atan2(r[0, 1], r[1, 1])
            pitch = math.pi / 2
        else:
            roll = math.atan2(-r[0, 1], r[1, 1])
            pitch = -math.pi / 2
        return EulerAngles(wrap_angle(roll), pitch, 0.0), True
    roll = math.atan2(r[2, 1], r[2, 2])
    yaw = math.atan2(r[1, 0], r[0, 0])
    return EulerAngles(wrap_angle(roll), pitch, wrap_angle(yaw)), False


def convert_to_euler(t: Transform3 | np.ndarray) -> EulerAngles:
    """Roll/pitch/yaw of the rotation part; warns on gimbal lock."""
    angles, locked = euler_with_flag(t)
    if locked:
        warnings.warn("gimbal lock: yaw pinned to 0", GimbalLockWarning, stacklevel=2)
    return angles


def shortest_arc(a, b) -> np.ndarray:
    """Minimal rotation taking direction ``a`` onto direction ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    v = np.cross(a, b)
    c = float(a @ b)
    if c < -1.0 + 1e-12:
        # antiparallel: half turn about any axis perpendicular to a
        axis = np.cross(a, (1.0, 0.0, 0.0))
        if np.linalg.norm(axis) < 1e-6:
            axis = np.cross(a, (0.0, 1.0, 0.0))
        axis /= np.linalg.norm(axis)
        return 2.0 * np.outer(axis, axis) - np.eye(3)
    vx = np.array(((0.0, -v[2], v[1]), (v[2], 0.0, -v[0]), (-v[1], v[0], 0.0)))
    return np.eye(3) + vx + vx @ vx / (1.0 + c)
