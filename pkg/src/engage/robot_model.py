"""Robot description: joint tree, DoF and kept axes, limits, sensor-to-head transform.

Model files are JSON::

    {
      "name": "pepper-like upper body",
      "joints": [
        {"name": "LShoulder", "parent": "Torso", "dof": 2,
         "kept_axes": ["roll", "pitch"],
         "limits_radians": [[-1.56, 1.56], [-2.08, 2.08]],
         "alignment": {"rotation": [...9], "translation_meters": [...3]}}
      ],
      "t_rs": {"rotation": [...9 row-major], "translation": [x, y, z]},
      "calibration": {"LShoulder": {"rotation": [...9], "translation_meters": [...3]}}
    }

``kept_axes`` defaults to the first ``dof`` of roll, pitch, yaw. ``alignment``
and ``calibration`` entries are optional; calibration gives each joint's
local transform at the calibration (T-)pose and defaults to identity.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .errors import (CycleError, LimitOrderError, ModelError, ModelValidationError,
                     SchemaError)
from .geometry import IDENTITY, Transform3, is_rotation
from .skeleton import PoseTransform, SkeletonTopology

AXES = ("roll", "pitch", "yaw")


@dataclass(frozen=True)
class RobotJoint:
    name: str
    parent: str | None
    dof: int
    kept_axes: tuple[str, ...]
    limits: tuple[tuple[float, float], ...]
    rotate_align: Transform3 | None = None
    translate_align: Transform3 | None = None

    @property
    def axis_indices(self) -> tuple[int, ...]:
        return tuple(AXES.index(a) for a in self.kept_axes)


@dataclass(frozen=True, eq=False)
class RobotModel:
    name: str
    joints: tuple[RobotJoint, ...]
    t_rs: Transform3
    calibration_pose: PoseTransform

    def __post_init__(self):
        object.__setattr__(self, "_by_name", {j.name: j for j in self.joints})

    def joint(self, name: str) -> RobotJoint:
        return self._by_name[name]

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    @property
    def topology(self) -> SkeletonTopology:
        return SkeletonTopology(
            tuple(j.name for j in self.joints),
            {j.name: j.parent for j in self.joints},
            {n: t.translation for n, t in self.calibration_pose.locals.items()},
        )


def _bundled(name: str) -> Path:
    return Path(__file__).parent / "data" / "models" / name


def bundled_models() -> dict[str, Path]:
    return {p.stem: p for p in sorted(_bundled("").glob("*.json"))}


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _numbers(value, n: int, where: str, errors: list[ModelError]) -> list[float] | None:
    if not isinstance(value, list) or len(value) != n or not all(_is_number(v) for v in value):
        errors.append(SchemaError(where, f"expected a list of {n} finite numbers"))
        return None
    return [float(v) for v in value]


def _transform(doc, where: str, errors: list[ModelError],
               translation_key: str = "translation_meters") -> Transform3 | None:
    if not isinstance(doc, dict):
        errors.append(SchemaError(where, "expected an object"))
        return None
    n_before = len(errors)
    rot = np.eye(3)
    if "rotation" in doc:
        vals = _numbers(doc["rotation"], 9, f"{where}.rotation", errors)
        if vals is not None:
            rot = np.array(vals).reshape(3, 3)
            if not is_rotation(rot, atol=1e-6):
                errors.append(SchemaError(f"{where}.rotation",
                                          "not an orthonormal right-handed rotation"))
    trans = np.zeros(3)
    if translation_key in doc:
        vals = _numbers(doc[translation_key], 3, f"{where}.{translation_key}", errors)
        if vals is not None:
            trans = np.array(vals)
    unknown = set(doc) - {"rotation", translation_key}
    for key in sorted(unknown):
        errors.append(SchemaError(f"{where}.{key}", "unknown field"))
    if len(errors) > n_before:
        return None
    return Transform3(rot, trans)


def _load_document(document) -> Any:
    if isinstance(document, (dict, list)):
        return document
    if isinstance(document, bytes):
        document = document.decode()
    if isinstance(document, str) and document.lstrip().startswith("{"):
        text = document
    elif isinstance(document, (str, os.PathLike)):
        text = Path(document).read_text()
    else:
        raise TypeError(f"cannot load a model from {type(document).__name__}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelValidationError([SchemaError("<document>", f"invalid JSON: {exc}")]) from None


def _check_joint(i: int, doc, errors: list[ModelError]) -> RobotJoint | None:
    where = f"joints[{i}]"
    if not isinstance(doc, dict):
        errors.append(SchemaError(where, "expected an object"))
        return None
    n_before = len(errors)
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        errors.append(SchemaError(f"{where}.name", "expected a non-empty string"))
    else:
        where = f"joints[{i}]({name})"
    parent = doc.get("parent")
    if parent is not None and not isinstance(parent, str):
        errors.append(SchemaError(f"{where}.parent", "expected a joint name or null"))

    dof = doc.get("dof")
    if not isinstance(dof, int) or isinstance(dof, bool) or dof not in (1, 2, 3):
        errors.append(SchemaError(f"{where}.dof", "expected 1, 2 or 3"))
        dof = None

    kept = doc.get("kept_axes")
    if kept is None:
        kept = list(AXES[:dof]) if dof else []
    elif not isinstance(kept, list) or not all(a in AXES for a in kept):
        errors.append(SchemaError(f"{where}.kept_axes", f"expected a list drawn from {AXES}"))
        kept = None
    if kept is not None:
        if len(set(kept)) != len(kept) or kept != sorted(kept, key=AXES.index):
            errors.append(LimitOrderError(f"{where}.kept_axes",
                                          "axes must be distinct and in roll, pitch, yaw order"))
        if dof is not None and len(kept) != dof:
            errors.append(LimitOrderError(f"{where}.kept_axes",
                                          f"dof is {dof} but {len(kept)} axes are kept"))

    limits = doc.get("limits_radians")
    parsed_limits: list[tuple[float, float]] = []
    if limits is None:
        n = len(kept) if kept is not None else (dof or 0)
        parsed_limits = [(-math.pi, math.pi)] * n
    elif not isinstance(limits, list):
        errors.append(SchemaError(f"{where}.limits_radians", "expected a list of [min, max] pairs"))
    else:
        if dof is not None and len(limits) != dof:
            errors.append(LimitOrderError(f"{where}.limits_radians",
                                          f"expected {dof} [min, max] pairs, got {len(limits)}"))
        for k, pair in enumerate(limits):
            vals = _numbers(pair, 2, f"{where}.limits_radians[{k}]", errors)
            if vals is None:
                continue
            if not vals[0] < vals[1]:
                errors.append(LimitOrderError(f"{where}.limits_radians[{k}]",
                                              f"min {vals[0]} is not below max {vals[1]}"))
            parsed_limits.append((vals[0], vals[1]))

    rotate_align = translate_align = None
    if "alignment" in doc:
        align = _transform(doc["alignment"], f"{where}.alignment", errors)
        if align is not None:
            rotate_align = Transform3(align.rotation, np.zeros(3))
            translate_align = Transform3(np.eye(3), align.translation)

    known = {"name", "parent", "dof", "kept_axes", "limits_radians", "alignment"}
    for key in sorted(set(doc) - known):
        errors.append(SchemaError(f"{where}.{key}", "unknown field"))

    if len(errors) > n_before:
        return None
    return RobotJoint(name, parent, dof, tuple(kept), tuple(parsed_limits),
                      rotate_align, translate_align)


def _check_tree(joints: list[RobotJoint], errors: list[ModelError]):
    names = [j.name for j in joints]
    by_name = {j.name: j for j in joints}
    for j in joints:
        if j.parent is not None and j.parent not in by_name:
            errors.append(SchemaError(f"joints({j.name}).parent", f"unknown joint {j.parent!r}"))
    roots = [j.name for j in joints if j.parent is None]
    if len(roots) != 1:
        errors.append(SchemaError("joints", f"expected exactly one root joint, found {roots}"))
    reported: set[str] = set()
    for start in names:
        seen = []
        cur = start
        while cur is not None and cur in by_name and cur not in seen:
            seen.append(cur)
            cur = by_name[cur].parent
        if cur is not None and cur in seen:
            cycle = seen[seen.index(cur):]
            key = min(cycle)
            if key not in reported:
                reported.add(key)
                errors.append(CycleError(f"joints({key}).parent",
                                         "parent chain forms a cycle: " + " -> ".join(cycle + [cur])))


def load_model(document) -> RobotModel:
    """Parse and validate a robot model.

    ``document`` is a dict, a JSON string or a path. Raises
    :class:`ModelValidationError` listing every problem found.
    """
    doc = _load_document(document)
    errors: list[ModelError] = []
    if not isinstance(doc, dict):
        raise ModelValidationError([SchemaError("<document>", "expected a JSON object")])

    raw_joints = doc.get("joints")
    joints: list[RobotJoint] = []
    if not isinstance(raw_joints, list) or not raw_joints:
        errors.append(SchemaError("joints", "expected a non-empty list"))
    else:
        for i, jd in enumerate(raw_joints):
            j = _check_joint(i, jd, errors)
            if j is not None:
                joints.append(j)
        names = [j.name for j in joints]
        for n in sorted({n for n in names if names.count(n) > 1}):
            errors.append(SchemaError(f"joints({n}).name", "duplicate joint name"))
        if len(joints) == len(raw_joints):
            _check_tree(joints, errors)

    t_rs = IDENTITY
    if "t_rs" not in doc:
        errors.append(SchemaError("t_rs", "missing sensor-to-head transform"))
    else:
        t = _transform(doc["t_rs"], "t_rs", errors, translation_key="translation")
        if t is not None:
            t_rs = t

    calib: dict[str, Transform3] = {}
    raw_calib = doc.get("calibration", {})
    if not isinstance(raw_calib, dict):
        errors.append(SchemaError("calibration", "expected an object keyed by joint name"))
    else:
        known = {j.name for j in joints}
        for name, entry in raw_calib.items():
            if joints and name not in known:
                errors.append(SchemaError(f"calibration.{name}", "unknown joint"))
                continue
            t = _transform(entry, f"calibration.{name}", errors)
            if t is not None:
                calib[name] = t

    for key in sorted(set(doc) - {"name", "joints", "t_rs", "calibration", "notes"}):
        errors.append(SchemaError(key, "unknown field"))

    if errors:
        raise ModelValidationError(errors)

    pose = PoseTransform({j.name: calib.get(j.name, IDENTITY) for j in joints})
    return RobotModel(str(doc.get("name", "robot")), tuple(joints), t_rs, pose)


def validate(document) -> list[ModelError]:
    """All validation problems in ``document`` (empty when it loads)."""
    try:
        load_model(document)
    except ModelValidationError as exc:
        return exc.errors
    return []
