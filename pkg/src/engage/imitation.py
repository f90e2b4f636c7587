"""Approximate imitation: map human joint rotations onto reduced-DoF robot joints.

Each human joint's local transform is aligned to its robot joint,
decomposed into roll/pitch/yaw, truncated to the axes the robot joint has,
and clamped to its limits. A :class:`DelayBuffer` holds the resulting
configurations back by a fixed time so the robot mirrors rather than
shadows the demonstrator.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DegenerateBone, MissingJoint, NonMonotonicTimestamp
from .geometry import IDENTITY, Transform3, compose, euler_with_flag
from .robot_model import AXES, RobotModel
from .skeleton import MIN_BONE, PoseTransform, SkeletonTopology, global_transforms

log = logging.getLogger(__name__)

DEFAULT_DELAY = 1.0
# slack when comparing timestamps against the release time
TIME_EPS = 1e-9


@dataclass(frozen=True)
class CorrespondencePair:
    human: str
    robot: str
    rotate_align: Transform3 = IDENTITY
    translate_align: Transform3 = IDENTITY


@dataclass(frozen=True)
class JointCorrespondence:
    pairs: tuple[CorrespondencePair, ...]

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        robots = [p.robot for p in self.pairs]
        if len(set(robots)) != len(robots):
            raise ValueError("robot joints in a correspondence must be distinct")

    @property
    def human_joints(self) -> tuple[str, ...]:
        return tuple(p.human for p in self.pairs)

    def check(self, model: RobotModel, human_joints: Iterable[str] | None = None):
        for p in self.pairs:
            if p.robot not in model:
                raise MissingJoint(p.robot, "robot model")
        if human_joints is not None:
            known = set(human_joints)
            for p in self.pairs:
                if p.human not in known:
                    raise MissingJoint(p.human, "human skeleton")


@dataclass(frozen=True, eq=False)
class JointConfig:
    """Robot joint angles in radians, each tuple ordered roll[, pitch[, yaw]]."""

    angles: dict[str, tuple[float, ...]]
    timestamp: float = 0.0
    limit_hits: int = 0
    gimbal_locks: int = 0


def rotate_align(robot_joint_frame: Transform3, human_joint_frame: Transform3) -> Transform3:
    """Pure rotation taking the human frame's axes onto the robot frame's."""
    return Transform3(human_joint_frame.rotation.T @ robot_joint_frame.rotation, np.zeros(3))


def translate_align(robot_link, human_bone) -> Transform3:
    """Translation, in the human joint's parent frame, moving bone onto link."""
    robot_link = np.asarray(robot_link, dtype=float)
    human_bone = np.asarray(human_bone, dtype=float)
    if np.linalg.norm(robot_link) < MIN_BONE:
        raise DegenerateBone(f"robot link {robot_link.tolist()} is shorter than {MIN_BONE} m")
    if np.linalg.norm(human_bone) < MIN_BONE:
        raise DegenerateBone(f"human bone {human_bone.tolist()} is shorter than {MIN_BONE} m")
    return Transform3(np.eye(3), robot_link - human_bone)


def build_correspondence(pairs: Sequence[tuple[str, str]], human: SkeletonTopology,
                         model: RobotModel,
                         human_calibration: PoseTransform | None = None) -> JointCorrespondence:
    """Compute alignments for ``(human, robot)`` joint pairs at the calibration pose.

    Both skeletons are taken to stand in a common reference at calibration:
    the human in ``human_calibration`` (its rest pose by default), the robot
    in ``model.calibration_pose``. Alignments declared in the robot model
    override the computed ones. Zero-length bones get a zero translation.
    """
    if human_calibration is None:
        human_calibration = human.rest_pose()
    h_glob = global_transforms(human_calibration, human)
    r_glob = global_transforms(model.calibration_pose, model.topology)
    out = []
    for h, r in pairs:
        if h not in human.parent:
            raise MissingJoint(h, "human skeleton")
        if r not in model:
            raise MissingJoint(r, "robot model")
        joint = model.joint(r)
        rot = joint.rotate_align
        if rot is None:
            rot = rotate_align(r_glob[r], h_glob[h])
        if joint.translate_align is not None:
            trans = joint.translate_align
        else:
            try:
                trans = translate_align(model.calibration_pose[r].translation,
                                        human_calibration[h].translation)
            except DegenerateBone:
                trans = IDENTITY
        out.append(CorrespondencePair(h, r, rot, trans))
    return JointCorrespondence(tuple(out))


def truncate(angles: Sequence[float], kept_axes: Sequence[str]) -> tuple[float, ...]:
    """Select the kept axes from a full roll/pitch/yaw triple.

    A sequence that already has one entry per kept axis is returned as is,
    so truncation is idempotent.
    """
    if len(angles) == len(kept_axes):
        return tuple(float(a) for a in angles)
    if len(angles) != 3:
        raise ValueError(f"expected 3 angles or {len(kept_axes)}, got {len(angles)}")
    return tuple(float(angles[AXES.index(a)]) for a in kept_axes)


def aligned_transform(pair: CorrespondencePair, movement: Transform3) -> Transform3:
    return compose(compose(pair.translate_align, movement), pair.rotate_align)


def approximate_imitation(corr: JointCorrespondence, movement: PoseTransform,
                          model: RobotModel) -> JointConfig:
    angles: dict[str, tuple[float, ...]] = {}
    hits = locks = 0
    for pair in corr.pairs:
        if pair.human not in movement.locals:
            raise MissingJoint(pair.human)
        joint = model.joint(pair.robot)
        euler, locked = euler_with_flag(aligned_transform(pair, movement.locals[pair.human]))
        locks += locked
        kept = truncate(euler, joint.kept_axes)
        clamped = []
        for a, (lo, hi) in zip(kept, joint.limits):
            if a < lo or a > hi:
                hits += 1
                a = min(max(a, lo), hi)
            clamped.append(a)
        angles[pair.robot] = tuple(clamped)
    if locks:
        log.debug("t=%s: %d joint(s) at gimbal lock", movement.timestamp, locks)
    return JointConfig(angles, movement.timestamp, hits, locks)


@dataclass
class DelayBuffer:
    """FIFO that releases each item ``delay`` seconds after it was pushed.

    Release is driven by the timestamps of later pushes: pushing at time
    ``t`` releases every queued item stamped at or before ``t - delay``.
    """

    delay: float = DEFAULT_DELAY
    _queue: deque = field(default_factory=deque, repr=False)
    _last: float | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.delay < 0:
            raise ValueError("delay must be non-negative")

    def __len__(self) -> int:
        return len(self._queue)

    def push(self, t: float, item) -> list[tuple[float, object]]:
        """Queue ``item`` at time ``t``; return released ``(source_t, item)`` pairs."""
        if self._last is not None and not t > self._last:
            raise NonMonotonicTimestamp(f"timestamp {t} does not follow {self._last}")
        self._last = t
        self._queue.append((t, item))
        out = []
        while self._queue and self._queue[0][0] + self.delay <= t + TIME_EPS:
            out.append(self._queue.popleft())
        return out


def delayed(stream: Iterable[tuple[float, object]],
            delay: float = DEFAULT_DELAY) -> Iterator[tuple[float, float, object]]:
    """Yield ``(emit_t, source_t, item)`` for a stream of ``(t, item)``."""
    buf = DelayBuffer(delay)
    for t, item in stream:
        for src_t, released in buf.push(t, item):
            yield t, src_t, released
