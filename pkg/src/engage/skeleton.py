"""Skeleton topology and the two body-pose forms.

A pose is either a set of joint positions in the sensor frame
(:class:`PosePosition`) or a set of per-joint local transforms over the
joint tree (:class:`PoseTransform`). Forward kinematics converts the second
into the first; :func:`to_transform_form` goes the other way.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import DegenerateBoneWarning, MissingJoint, TopologyError
from .geometry import Transform3, compose, shortest_arc

# bones shorter than this carry no direction
MIN_BONE = 1e-9


@dataclass(frozen=True, eq=False)
class SkeletonTopology:
    """Joint tree: names in declaration order, parent links and rest offsets.

    ``rest_offset[j]`` is the bone vector from ``parent[j]`` to ``j`` in the
    parent's frame (meters). The root offset is its rest position.
    """

    joints: tuple[str, ...]
    parent: Mapping[str, str | None]
    rest_offset: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        joints = tuple(self.joints)
        object.__setattr__(self, "joints", joints)
        if len(set(joints)) != len(joints):
            raise TopologyError("duplicate joint names")
        parent = {j: self.parent.get(j) for j in joints}
        roots = [j for j, p in parent.items() if p is None]
        if len(roots) != 1:
            raise TopologyError(f"expected exactly one root, found {roots}")
        for j, p in parent.items():
            if p is not None and p not in parent:
                raise TopologyError(f"parent {p!r} of {j!r} is not a joint")
        offsets = {}
        for j in joints:
            off = np.asarray(self.rest_offset.get(j, np.zeros(3)), dtype=float).reshape(3)
            if not np.all(np.isfinite(off)):
                raise TopologyError(f"non-finite rest offset for {j!r}")
            off.setflags(write=False)
            offsets[j] = off
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "rest_offset", offsets)
        object.__setattr__(self, "_order", self._topological_order(roots[0]))

    def _topological_order(self, root: str) -> tuple[str, ...]:
        children = self.children_map()
        order, stack = [], [root]
        while stack:
            j = stack.pop()
            order.append(j)
            stack.extend(reversed(children[j]))
        if len(order) != len(self.joints):
            missing = sorted(set(self.joints) - set(order))
            raise TopologyError(f"parent relation has a cycle through {missing}")
        return tuple(order)

    @property
    def root(self) -> str:
        return self._order[0]

    @property
    def order(self) -> tuple[str, ...]:
        """Joints with every parent before its children."""
        return self._order

    def children_map(self) -> dict[str, list[str]]:
        children: dict[str, list[str]] = {j: [] for j in self.joints}
        for j, p in self.parent.items():
            if p is not None:
                children[p].append(j)
        return children

    def rest_pose(self, timestamp: float = 0.0) -> PoseTransform:
        return PoseTransform(
            {j: Transform3(np.eye(3), self.rest_offset[j]) for j in self.joints}, timestamp
        )


@dataclass(frozen=True, eq=False)
class PosePosition:
    positions: Mapping[str, np.ndarray]
    timestamp: float = 0.0

    def __getitem__(self, joint: str) -> np.ndarray:
        try:
            return self.positions[joint]
        except KeyError:
            raise MissingJoint(joint) from None


@dataclass(frozen=True, eq=False)
class PoseTransform:
    locals: Mapping[str, Transform3]
    timestamp: float = 0.0

    def __getitem__(self, joint: str) -> Transform3:
        try:
            return self.locals[joint]
        except KeyError:
            raise MissingJoint(joint) from None


def global_transforms(pose: PoseTransform, topo: SkeletonTopology) -> dict[str, Transform3]:
    """Compose local transforms down the tree into sensor-frame transforms."""
    out: dict[str, Transform3] = {}
    for j in topo.order:
        local = pose[j]
        p = topo.parent[j]
        out[j] = local if p is None else compose(out[p], local)
    return out


def to_position_form(pose: PoseTransform, topo: SkeletonTopology) -> PosePosition:
    g = global_transforms(pose, topo)
    return PosePosition({j: g[j].translation for j in topo.joints}, pose.timestamp)


def _fit_rotation(rest: np.ndarray, seen: np.ndarray, base: np.ndarray) -> np.ndarray:
    """Rotation R with R @ rest[k] ~ seen[k] for each child bone k.

    One usable bone leaves a twist about it free; it is resolved by the
    smallest extra rotation on top of ``base``. Two or more non-collinear
    bones fix R by orthogonal Procrustes.
    """
    if len(rest) >= 2:
        h = rest.T @ seen
        u, s, vt = np.linalg.svd(h)
        if s[1] > 1e-9 * max(s[0], 1.0):
            d = np.sign(np.linalg.det(vt.T @ u.T))
            return vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    # single bone, or all bones collinear
    return shortest_arc(base @ rest[0], seen[0]) @ base


def to_transform_form(pose: PosePosition, topo: SkeletonTopology,
                      prev: PoseTransform | None = None) -> PoseTransform:
    """Recover local transforms from joint positions.

    Each joint's rotation is fitted to the directions of its child bones,
    expressed in the parent's already-recovered frame. Child translations are
    then set from the observed positions, so forward kinematics reproduces
    the input exactly up to rounding. Joints whose bones are all shorter
    than ``MIN_BONE`` (and leaves) keep the rotation from ``prev``, or the
    identity.
    """
    for j in topo.joints:
        if j not in pose.positions:
            raise MissingJoint(j)
    children = topo.children_map()
    rot_global: dict[str, np.ndarray] = {}
    locals_: dict[str, Transform3] = {}
    degenerate = []
    for j in topo.order:
        p = topo.parent[j]
        parent_rot = np.eye(3) if p is None else rot_global[p]
        pos = np.asarray(pose.positions[j], dtype=float)
        base = np.eye(3)
        if prev is not None and j in prev.locals:
            base = np.asarray(prev.locals[j].rotation)
        rest, seen = [], []
        for c in children[j]:
            off = topo.rest_offset[c]
            bone = np.asarray(pose.positions[c], dtype=float) - pos
            if np.linalg.norm(off) < MIN_BONE or np.linalg.norm(bone) < MIN_BONE:
                continue
            rest.append(off)
            seen.append(parent_rot.T @ bone)
        if rest:
            local_rot = _fit_rotation(np.array(rest), np.array(seen), base)
        else:
            if children[j]:
                degenerate.append(j)
            local_rot = base
        rot_global[j] = parent_rot @ local_rot
        if p is None:
            trans = pos
        else:
            trans = rot_global[p].T @ (pos - np.asarray(pose.positions[p], dtype=float))
        locals_[j] = Transform3(local_rot, trans)
    if degenerate:
        warnings.warn(f"degenerate bones, rotation kept for {degenerate}",
                      DegenerateBoneWarning, stacklevel=2)
    return PoseTransform(locals_, pose.timestamp)
