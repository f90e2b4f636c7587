"""Pose streams from BVH motion capture files and from NDJSON pose lines.

NDJSON pose line (one JSON object per line)::

    {"t": 0.033, "joints": {"LeftArm": {"pos": [x, y, z], "rot": [r00, r01, ..., r22]}}}

``pos`` is the joint position in the sensor frame (meters). ``rot`` is
optional: the joint's local rotation in its parent frame, row-major.
"""

from __future__ import annotations

import io
import json
import logging
import math
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import ChannelMismatch, ParseError, TopologyMismatch
from .geometry import Transform3, is_rotation
from .skeleton import (PosePosition, PoseTransform, SkeletonTopology, to_position_form,
                       to_transform_form)

log = logging.getLogger(__name__)

_POSITION_CHANNELS = {"Xposition": 0, "Yposition": 1, "Zposition": 2}
_ROTATION_CHANNELS = {"Xrotation": "X", "Yrotation": "Y", "Zrotation": "Z"}


class PoseFrame:
    """One timestamped pose; either form is derived from the other on demand."""

    __slots__ = ("t", "_position", "_transform", "_topology")

    def __init__(self, t: float, position: PosePosition | None = None,
                 transform: PoseTransform | None = None,
                 topology: SkeletonTopology | None = None):
        if position is None and transform is None:
            raise ValueError("a frame needs at least one pose form")
        self.t = float(t)
        self._position = position
        self._transform = transform
        self._topology = topology

    @property
    def position(self) -> PosePosition:
        if self._position is None:
            self._position = to_position_form(self._transform, self._topology)
        return self._position

    @property
    def transform(self) -> PoseTransform | None:
        return self._transform

    @property
    def joints(self) -> tuple[str, ...]:
        if self._position is not None:
            return tuple(self._position.positions)
        return tuple(self._transform.locals)


@dataclass
class PoseStream:
    topology: SkeletonTopology | None
    frames: list[PoseFrame]
    frame_period: float
    channels: dict[str, tuple[str, ...]] | None = None
    rejected: list[tuple[int, str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self) -> Iterator[PoseFrame]:
        return iter(self.frames)

    @property
    def duration(self) -> float:
        return len(self.frames) * self.frame_period


# ---------------------------------------------------------------- BVH


def _tokens(text: str) -> list[tuple[str, int]]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        for tok in line.split():
            out.append((tok, lineno))
    return out


class _BvhParser:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.toks = _tokens(text)
        self.i = 0
        self.names: list[str] = []
        self.parent: dict[str, str | None] = {}
        self.offset: dict[str, list[float]] = {}
        self.channels: dict[str, tuple[str, ...]] = {}

    def _eof_line(self) -> int:
        return len(self.lines)

    def peek(self) -> str | None:
        return self.toks[self.i][0] if self.i < len(self.toks) else None

    def next(self, expect: str | None = None) -> tuple[str, int]:
        if self.i >= len(self.toks):
            raise ParseError(f"unexpected end of file (expected {expect or 'more input'})",
                             self._eof_line())
        tok, line = self.toks[self.i]
        if expect is not None and tok != expect:
            raise ParseError(f"expected {expect!r}, found {tok!r}", line)
        self.i += 1
        return tok, line

    def number(self) -> float:
        tok, line = self.next()
        try:
            return float(tok)
        except ValueError:
            raise ParseError(f"expected a number, found {tok!r}", line) from None

    def hierarchy(self):
        self.next("HIERARCHY")
        self.next("ROOT")
        self.joint(None)

    def joint(self, parent: str | None):
        name, line = self.next()
        if name in self.parent:
            raise ParseError(f"duplicate joint name {name!r}", line)
        self.names.append(name)
        self.parent[name] = parent
        self.next("{")
        self.next("OFFSET")
        self.offset[name] = [self.number() for _ in range(3)]
        chans: tuple[str, ...] = ()
        if self.peek() == "CHANNELS":
            _, cline = self.next()
            n = self.number()
            if n != int(n) or n < 0:
                raise ParseError(f"bad channel count {n}", cline)
            chans = tuple(self.next()[0] for _ in range(int(n)))
            for c in chans:
                if c not in _POSITION_CHANNELS and c not in _ROTATION_CHANNELS:
                    raise ParseError(f"unknown channel {c!r}", cline)
        self.channels[name] = chans
        n_end = 0
        while True:
            tok = self.peek()
            if tok == "JOINT":
                self.next()
                self.joint(name)
            elif tok == "End":
                self.next()
                self.next("Site")
                end = f"{name}_End" if n_end == 0 else f"{name}_End{n_end}"
                n_end += 1
                self.names.append(end)
                self.parent[end] = name
                self.channels[end] = ()
                self.next("{")
                self.next("OFFSET")
                self.offset[end] = [self.number() for _ in range(3)]
                self.next("}")
            elif tok == "}":
                self.next()
                return
            else:
                line = self.toks[self.i][1] if tok is not None else self._eof_line()
                raise ParseError(f"unexpected {tok!r} in joint {name!r}", line)

    def motion(self) -> tuple[np.ndarray, float]:
        self.next("MOTION")
        self.next("Frames:")
        n_frames = self.number()
        if n_frames != int(n_frames) or n_frames < 0:
            raise ParseError(f"bad frame count {n_frames}", self.toks[self.i - 1][1])
        self.next("Frame")
        self.next("Time:")
        frame_time = self.number()
        if not frame_time > 0:
            raise ParseError(f"frame time must be positive, got {frame_time}",
                             self.toks[self.i - 1][1])
        n_chan = sum(len(c) for c in self.channels.values())
        # motion rows are line-oriented
        start_line = self.toks[self.i - 1][1]
        rows = []
        for lineno in range(start_line + 1, len(self.lines) + 1):
            text = self.lines[lineno - 1].split()
            if not text:
                continue
            if len(rows) == int(n_frames):
                raise ParseError("more motion rows than declared frames", lineno)
            if len(text) != n_chan:
                raise ChannelMismatch(f"expected {n_chan} channel values, found {len(text)}", lineno)
            try:
                rows.append([float(v) for v in text])
            except ValueError:
                raise ParseError("non-numeric channel value", lineno) from None
        if len(rows) != int(n_frames):
            raise ParseError(f"truncated: {len(rows)} of {int(n_frames)} frames present",
                             len(self.lines))
        data = np.array(rows, dtype=float).reshape(int(n_frames), n_chan)
        if not np.all(np.isfinite(data)):
            raise ParseError("non-finite channel value")
        return data, frame_time


def _rotations(order: str, degrees: np.ndarray) -> np.ndarray:
    """Per-frame matrices for intrinsic rotations applied in ``order``."""
    if not order:
        return np.broadcast_to(np.eye(3), (len(degrees), 3, 3))
    return Rotation.from_euler(order, degrees, degrees=True).as_matrix()


def parse_bvh(data: bytes | str, rename: Mapping[str, str] | None = None,
              scale: float = 1.0) -> PoseStream:
    """Parse a BVH file's text into a pose stream in transformation form.

    Each joint's rotation follows the channel order it declares, e.g.
    ``Zrotation Xrotation Yrotation`` gives ``Rz @ Rx @ Ry``. Position
    channels are added to the joint offset. End sites become joints named
    ``<parent>_End``. ``scale`` converts file lengths to meters (0.01 for
    centimeters).
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="strict")
    p = _BvhParser(data)
    p.hierarchy()
    values, frame_time = p.motion()
    if scale != 1.0:
        for j in p.offset:
            p.offset[j] = [v * scale for v in p.offset[j]]

    names = p.names
    n = len(values)
    rot = {}
    trans = {}
    col = 0
    for j in names:
        chans = p.channels[j]
        block = values[:, col:col + len(chans)]
        col += len(chans)
        t = np.tile(np.asarray(p.offset[j], dtype=float), (n, 1))
        order, rot_cols = "", []
        for k, c in enumerate(chans):
            if c in _POSITION_CHANNELS:
                t[:, _POSITION_CHANNELS[c]] += block[:, k] * scale
            else:
                order += _ROTATION_CHANNELS[c]
                rot_cols.append(k)
        rot[j] = _rotations(order, block[:, rot_cols])
        trans[j] = t

    mapped = [rename.get(j, j) for j in names] if rename else list(names)
    if len(set(mapped)) != len(mapped):
        raise ParseError("rename table maps two joints onto one name")
    m = dict(zip(names, mapped))
    topo = SkeletonTopology(
        tuple(mapped),
        {m[j]: (m[p.parent[j]] if p.parent[j] is not None else None) for j in names},
        {m[j]: p.offset[j] for j in names},
    )
    frames = []
    for k in range(n):
        locals_ = {m[j]: Transform3(rot[j][k], trans[j][k]) for j in names}
        t = k * frame_time
        frames.append(PoseFrame(t, transform=PoseTransform(locals_, t), topology=topo))
    channels = {m[j]: p.channels[j] for j in names}
    return PoseStream(topo, frames, frame_time, channels)


def load_bvh(path: str | os.PathLike, rename: Mapping[str, str] | None = None,
             scale: float = 1.0) -> PoseStream:
    return parse_bvh(Path(path).read_bytes(), rename, scale)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_bvh(stream: PoseStream, out: IO[str] | None = None) -> str:
    """Serialize a transformation-form stream back to BVH text.

    Joints keep the channel layout they were parsed with; streams without
    one get 6 root channels and ``Zrotation Xrotation Yrotation`` elsewhere.
    """
    topo = stream.topology
    if topo is None:
        raise ValueError("writing BVH needs a skeleton topology")
    children = topo.children_map()
    default_rot = ("Zrotation", "Xrotation", "Yrotation")

    def chans(j: str) -> tuple[str, ...]:
        if stream.channels is not None and j in stream.channels:
            return stream.channels[j]
        if j.endswith("_End") or not children[j]:
            return ()
        if j == topo.root:
            return ("Xposition", "Yposition", "Zposition") + default_rot
        return default_rot

    lines = ["HIERARCHY"]
    emitted: list[str] = []

    def emit(j: str, depth: int):
        pad = "  " * depth
        c = chans(j)
        is_end = not c and not children[j] and j != topo.root
        if is_end:
            lines.append(f"{pad}End Site")
        else:
            lines.append(f"{pad}{'ROOT' if j == topo.root else 'JOINT'} {j}")
            emitted.append(j)
        lines.append(pad + "{")
        off = topo.rest_offset[j]
        lines.append(f"{pad}  OFFSET {' '.join(_fmt(v) for v in off)}")
        if not is_end:
            lines.append(f"{pad}  CHANNELS {len(c)}" + "".join(" " + x for x in c))
        for ch in children[j]:
            emit(ch, depth + 1)
        lines.append(pad + "}")

    emit(topo.root, 0)
    lines.append("MOTION")
    lines.append(f"Frames: {len(stream.frames)}")
    lines.append(f"Frame Time: {_fmt(stream.frame_period)}")

    for frame in stream.frames:
        pose = frame.transform
        if pose is None:
            raise ValueError("writing BVH needs transformation-form frames")
        row = []
        for j in emitted:
            c = chans(j)
            local = pose[j]
            order = "".join(_ROTATION_CHANNELS[x] for x in c if x in _ROTATION_CHANNELS)
            angles = []
            if order:
                angles = list(_euler_from_matrix(order, local.rotation))
            k = 0
            for x in c:
                if x in _POSITION_CHANNELS:
                    i = _POSITION_CHANNELS[x]
                    row.append(local.translation[i] - topo.rest_offset[j][i])
                else:
                    row.append(angles[k])
                    k += 1
        lines.append(" ".join(_fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if out is not None:
        out.write(text)
    return text


def _euler_from_matrix(order: str, r: np.ndarray) -> np.ndarray:
    if len(order) == 3:
        # at gimbal lock scipy zeroes the third angle; the matrix is still exact
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", "Gimbal lock", UserWarning)
            return Rotation.from_matrix(r).as_euler(order, degrees=True)
    # fewer than 3 rotation channels: the rotation must lie in their span
    if len(order) == 1:
        axis = "XYZ".index(order)
        rv = Rotation.from_matrix(r).as_rotvec()
        return np.degrees([rv[axis]])
    return Rotation.from_matrix(r).as_euler(order + "".join(a for a in "XYZ" if a not in order),
                                            degrees=True)[:2]


# ---------------------------------------------------------------- NDJSON


def _finite_list(v, n: int) -> bool:
    return (isinstance(v, list) and len(v) == n
            and all(isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)
                    for x in v))


def _parse_line(line: str) -> tuple[float, dict[str, np.ndarray], dict[str, np.ndarray]]:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON ({exc.msg})") from None
    if not isinstance(rec, dict):
        raise ValueError("record is not an object")
    t = rec.get("t")
    if not isinstance(t, (int, float)) or isinstance(t, bool) or not math.isfinite(t):
        raise ValueError("'t' must be a finite number")
    joints = rec.get("joints")
    if not isinstance(joints, dict) or not joints:
        raise ValueError("'joints' must be a non-empty object")
    pos, rot = {}, {}
    for name, j in joints.items():
        if not isinstance(j, dict):
            raise ValueError(f"joint {name!r} is not an object")
        if not _finite_list(j.get("pos"), 3):
            raise ValueError(f"joint {name!r}: 'pos' must be 3 finite numbers")
        pos[name] = np.array(j["pos"], dtype=float)
        if "rot" in j:
            if not _finite_list(j["rot"], 9):
                raise ValueError(f"joint {name!r}: 'rot' must be 9 finite numbers")
            r = np.array(j["rot"], dtype=float).reshape(3, 3)
            if not is_rotation(r, atol=1e-6):
                raise ValueError(f"joint {name!r}: 'rot' is not a rotation matrix")
            rot[name] = r
    return float(t), pos, rot


class NdjsonReader:
    """Incremental NDJSON pose reader.

    Iterating yields :class:`PoseFrame` objects in arrival order. Malformed
    lines are skipped and recorded in ``rejected`` as ``(line_number,
    message)``. A change of joint set raises :class:`TopologyMismatch`.

    With a ``topology``, frames without ``rot`` are given a transformation
    form fitted from positions, and local translations are derived from
    positions. Without one, ``rot`` frames carry zero local translations.
    """

    def __init__(self, source: Iterable[str], topology: SkeletonTopology | None = None,
                 rename: Mapping[str, str] | None = None):
        self.source = source
        self.topology = topology
        self.rename = dict(rename or {})
        self.rejected: list[tuple[int, str]] = []
        self.joints: tuple[str, ...] | None = None
        self._last_t: float | None = None
        self._prev: PoseTransform | None = None

    def __iter__(self) -> Iterator[PoseFrame]:
        for lineno, line in enumerate(self.source, 1):
            if not line.strip():
                continue
            try:
                t, pos, rot = _parse_line(line)
                if self._last_t is not None and not t > self._last_t:
                    raise ValueError(f"timestamp {t} does not follow {self._last_t}")
            except ValueError as exc:
                log.warning("line %d rejected: %s", lineno, exc)
                self.rejected.append((lineno, str(exc)))
                continue
            if self.rename:
                pos = {self.rename.get(k, k): v for k, v in pos.items()}
                rot = {self.rename.get(k, k): v for k, v in rot.items()}
            names = tuple(pos)
            if self.joints is None:
                self.joints = names
                if self.topology is not None and set(names) != set(self.topology.joints):
                    raise TopologyMismatch(
                        f"line {lineno}: joints {sorted(names)} do not match the skeleton")
            elif set(names) != set(self.joints):
                raise TopologyMismatch(f"line {lineno}: joint set changed mid-stream")
            self._last_t = t
            yield self._frame(t, pos, rot)

    def _frame(self, t: float, pos: dict, rot: dict) -> PoseFrame:
        position = PosePosition(pos, t)
        topo = self.topology
        transform = None
        if rot and len(rot) == len(pos):
            if topo is None:
                transform = PoseTransform({j: Transform3(r, np.zeros(3)) for j, r in rot.items()}, t)
            else:
                g: dict[str, np.ndarray] = {}
                locals_ = {}
                for j in topo.order:
                    p = topo.parent[j]
                    if p is None:
                        tr = pos[j]
                        g[j] = rot[j]
                    else:
                        tr = g[p].T @ (pos[j] - pos[p])
                        g[j] = g[p] @ rot[j]
                    locals_[j] = Transform3(rot[j], tr)
                transform = PoseTransform(locals_, t)
        elif topo is not None:
            transform = to_transform_form(position, topo, self._prev)
        self._prev = transform
        return PoseFrame(t, position, transform, topo)


def read_stream(source: Iterable[str], topology: SkeletonTopology | None = None,
                rename: Mapping[str, str] | None = None) -> NdjsonReader:
    return NdjsonReader(source, topology, rename)


def load_ndjson(source: Iterable[str] | str | os.PathLike,
                topology: SkeletonTopology | None = None,
                rename: Mapping[str, str] | None = None) -> PoseStream:
    """Read a whole NDJSON source into a :class:`PoseStream`."""
    if isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            return load_ndjson(fh.readlines(), topology, rename)
    reader = read_stream(source, topology, rename)
    frames = list(reader)
    if len(frames) >= 2:
        period = float(np.median(np.diff([f.t for f in frames])))
    else:
        period = 0.0
    return PoseStream(topology, frames, period, None, reader.rejected)


def frame_record(frame: PoseFrame, with_rot: bool = True) -> dict:
    joints = {}
    pos = frame.position.positions
    tr = frame.transform
    for j in pos:
        entry = {"pos": [float(v) for v in pos[j]]}
        if with_rot and tr is not None:
            entry["rot"] = [float(v) for v in tr.locals[j].rotation.ravel()]
        joints[j] = entry
    return {"t": frame.t, "joints": joints}


def write_ndjson(stream: PoseStream, out: IO[str] | None = None, with_rot: bool = True) -> str:
    buf = io.StringIO() if out is None else out
    for frame in stream.frames:
        buf.write(json.dumps(frame_record(frame, with_rot), separators=(",", ":")) + "\n")
    return buf.getvalue() if out is None else ""
