"""Engagement engine: drives attention and imitation over a pose stream.

The engine consumes every input frame in every mode and emits exactly one
:class:`EngagementFrame` per input frame, so traces from different modes
line up frame for frame. Traces are NDJSON, one frame per line.
"""

from __future__ import annotations

import enum
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .attention import (DEFAULT_ALPHA, DEFAULT_PARTICLES, DEFAULT_SIGMA0, SIGMA_FLOOR,
                        AttentionConfig, AttentionOutput, InstantAttention)
from .errors import EmptyTrace, EngageError, EngineError, MissingJoint
from .geometry import IDENTITY, Transform3
from .imitation import (DEFAULT_DELAY, CorrespondencePair, DelayBuffer, JointConfig,
                        JointCorrespondence, approximate_imitation, build_correspondence,
                        rotate_align)
from .ingest import PoseFrame, PoseStream
from .robot_model import RobotModel
from .skeleton import SkeletonTopology, global_transforms

log = logging.getLogger(__name__)


class Mode(str, enum.Enum):
    NONE = "none"
    ATTENTION = "attention"
    IMITATION = "imitation"
    BOTH = "both"

    @property
    def attends(self) -> bool:
        return self in (Mode.ATTENTION, Mode.BOTH)

    @property
    def imitates(self) -> bool:
        return self in (Mode.IMITATION, Mode.BOTH)


@dataclass(frozen=True, eq=False)
class EngagementFrame:
    t: float
    mode: Mode
    attention: AttentionOutput | None = None
    joint_config: JointConfig | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        att = None
        if self.attention is not None:
            att = {
                "joint": self.attention.joint,
                "point_sensor": [float(v) for v in self.attention.point_sensor],
                "point_robot": [float(v) for v in self.attention.point_robot],
            }
        jc = None
        if self.joint_config is not None:
            jc = {
                "source_t": self.joint_config.timestamp,
                "angles": {k: list(v) for k, v in self.joint_config.angles.items()},
            }
        return {"t": self.t, "mode": self.mode.value, "attention": att,
                "joint_config": jc, "diagnostics": self.diagnostics}

    def to_json(self) -> str:
        return json.dumps(self.to_record(), separators=(",", ":"))

    @classmethod
    def from_record(cls, rec: Mapping) -> EngagementFrame:
        att = None
        if rec.get("attention") is not None:
            a = rec["attention"]
            att = AttentionOutput(a["joint"], np.array(a["point_sensor"]),
                                  np.array(a["point_robot"]),
                                  dict(rec.get("diagnostics", {}).get("sigmas", {})))
        jc = None
        if rec.get("joint_config") is not None:
            j = rec["joint_config"]
            jc = JointConfig({k: tuple(v) for k, v in j["angles"].items()}, j["source_t"],
                             rec.get("diagnostics", {}).get("limit_hits", 0))
        return cls(rec["t"], Mode(rec["mode"]), att, jc, dict(rec.get("diagnostics", {})))


def payload_ok(frame: EngagementFrame) -> bool:
    """Whether a frame's payloads match its mode.

    Imitation payloads may only be missing while the delay buffer warms up,
    which the frame declares with ``diagnostics["warmup"]``.
    """
    warm = frame.diagnostics.get("warmup", False)
    has_att = frame.attention is not None
    has_jc = frame.joint_config is not None
    if frame.mode.attends != has_att:
        return False
    if frame.mode.imitates:
        return has_jc != warm
    return not has_jc and not warm


@dataclass
class EngineConfig:
    attention: AttentionConfig | None
    correspondence: list[tuple[str, str]]
    rename: dict[str, str] = field(default_factory=dict)
    delay: float = DEFAULT_DELAY
    skeleton: SkeletonTopology | None = None


def load_config(document, seed: int | None = None) -> EngineConfig:
    """Engine config from a dict, JSON text or path.

    Keys: ``attention`` ({tracked, particles, alpha, sigma0, sigma_floor,
    dwell_frames, workers, seed}), ``correspondence`` ([{human, robot}]),
    ``rename`` ({mocap name: name}), ``delay_seconds``, and ``skeleton``
    ({parent, rest_offset_meters}) for NDJSON input without BVH.
    """
    if isinstance(document, (str, os.PathLike)) and not str(document).lstrip().startswith("{"):
        document = Path(document).read_text()
    doc = json.loads(document) if isinstance(document, str) else dict(document)
    unknown = set(doc) - {"attention", "correspondence", "rename", "delay_seconds", "skeleton",
                          "notes"}
    if unknown:
        raise ValueError(f"unknown config keys {sorted(unknown)}")
    att = None
    if "attention" in doc:
        a = dict(doc["attention"])
        extra = set(a) - {"tracked", "particles", "alpha", "sigma0", "sigma_floor",
                          "dwell_frames", "workers", "seed"}
        if extra:
            raise ValueError(f"unknown attention keys {sorted(extra)}")
        att = AttentionConfig(
            tracked=tuple(a["tracked"]),
            M=int(a.get("particles", DEFAULT_PARTICLES)),
            alpha=float(a.get("alpha", DEFAULT_ALPHA)),
            sigma0=float(a.get("sigma0", DEFAULT_SIGMA0)),
            seed=int(seed if seed is not None else a.get("seed", 0)),
            sigma_floor=float(a.get("sigma_floor", SIGMA_FLOOR)),
            dwell_frames=int(a.get("dwell_frames", 0)),
            workers=int(a.get("workers", 1)),
        )
    corr = [(str(p["human"]), str(p["robot"])) for p in doc.get("correspondence", [])]
    skeleton = None
    if "skeleton" in doc:
        s = doc["skeleton"]
        parent = dict(s["parent"])
        skeleton = SkeletonTopology(tuple(parent), parent, s.get("rest_offset_meters", {}))
    return EngineConfig(att, corr, dict(doc.get("rename", {})),
                        float(doc.get("delay_seconds", DEFAULT_DELAY)), skeleton)


def correspondence_for(pairs: Sequence[tuple[str, str]], model: RobotModel,
                       human: SkeletonTopology | None) -> JointCorrespondence:
    if human is not None:
        return build_correspondence(pairs, human, model)
    # no human skeleton: human frames are taken to coincide with the sensor axes
    r_glob = global_transforms(model.calibration_pose, model.topology)
    out = []
    for h, r in pairs:
        if r not in model:
            raise MissingJoint(r, "robot model")
        j = model.joint(r)
        rot = j.rotate_align if j.rotate_align is not None else rotate_align(r_glob[r], IDENTITY)
        out.append(CorrespondencePair(h, r, rot, j.translate_align or IDENTITY))
    return JointCorrespondence(tuple(out))


class Engine:
    """Per-stream engine; feed frames in order with :meth:`process`."""

    def __init__(self, mode: Mode, model: RobotModel | None = None,
                 corr: JointCorrespondence | None = None,
                 cfg: AttentionConfig | None = None, delay: float = DEFAULT_DELAY):
        self.mode = Mode(mode)
        self.model = model
        self.corr = corr
        self.cfg = cfg
        self.delay = delay
        self.attention = None
        if self.mode.attends:
            if cfg is None:
                raise ValueError(f"mode {self.mode.value} needs an attention config")
            t_rs = model.t_rs if model is not None else IDENTITY
            self.attention = InstantAttention(cfg, t_rs)
        if self.mode.imitates and (model is None or corr is None):
            raise ValueError(f"mode {self.mode.value} needs a robot model and a correspondence")
        self.buffer = DelayBuffer(delay)
        self._held: JointConfig | None = None
        self.limit_hits = 0
        self.switches = 0
        self._last_joint: str | None = None

    def close(self):
        if self.attention is not None:
            self.attention.close()

    def process(self, frame: PoseFrame) -> EngagementFrame:
        diag: dict = {}
        att = None
        if self.attention is not None:
            att = self.attention.step(frame.position)
            diag["sigmas"] = att.sigmas
            if self._last_joint is not None and att.joint != self._last_joint:
                self.switches += 1
            self._last_joint = att.joint
        jc = None
        if self.mode.imitates:
            if frame.transform is None:
                raise ValueError("imitation needs transformation-form poses")
            cfg = approximate_imitation(self.corr, frame.transform, self.model)
            released = self.buffer.push(frame.t, cfg)
            if released:
                self._held = released[-1][1]
            jc = self._held
            diag["warmup"] = jc is None
            diag["limit_hits"] = jc.limit_hits if jc is not None else 0
            if jc is not None:
                self.limit_hits += jc.limit_hits
        return EngagementFrame(frame.t, self.mode, att, jc, diag)


@dataclass
class RunSummary:
    frames: int
    wall_seconds: float
    frames_per_second: float
    attention_switches: int
    limit_hits: int
    rejected_lines: int = 0

    def to_record(self) -> dict:
        return dict(self.__dict__)


def run(mode: Mode | str, stream: PoseStream | Iterable[PoseFrame],
        model: RobotModel | None, corr: JointCorrespondence | None,
        cfg: AttentionConfig | None, delay: float = DEFAULT_DELAY,
        sink: Callable[[EngagementFrame], object] | None = None) -> RunSummary:
    """Process a stream frame by frame, handing each output frame to ``sink``.

    Any module error aborts the run as :class:`EngineError` carrying the
    index of the failing input frame.
    """
    engine = Engine(Mode(mode), model, corr, cfg, delay)
    n = 0
    start = time.perf_counter()
    try:
        for i, frame in enumerate(stream):
            try:
                out = engine.process(frame)
            except (EngageError, ValueError, KeyError) as exc:
                raise EngineError(i, exc) from exc
            if sink is not None:
                sink(out)
            n += 1
    finally:
        engine.close()
    wall = time.perf_counter() - start
    rejected = len(getattr(stream, "rejected", []) or [])
    return RunSummary(n, wall, n / wall if wall > 0 else math.inf,
                      engine.switches, engine.limit_hits, rejected)


def run_to_list(mode, stream, model=None, corr=None, cfg=None,
                delay: float = DEFAULT_DELAY) -> tuple[list[EngagementFrame], RunSummary]:
    frames: list[EngagementFrame] = []
    summary = run(mode, stream, model, corr, cfg, delay, frames.append)
    return frames, summary


def count_switches(joints: Sequence[str | None]) -> int:
    seq = [j for j in joints if j is not None]
    return sum(1 for a, b in zip(seq, seq[1:]) if a != b)


def metrics(trace: Sequence[EngagementFrame | Mapping],
            timing: Mapping | None = None) -> dict:
    """Summary statistics of an engagement trace.

    ``timing`` is a run summary record; when given, its throughput is
    reported as ``frames_per_second``.
    """
    frames = [f if isinstance(f, EngagementFrame) else EngagementFrame.from_record(f)
              for f in trace]
    if not frames:
        raise EmptyTrace("trace has no frames")
    duration = frames[-1].t - frames[0].t
    joints = [f.attention.joint if f.attention is not None else None for f in frames]
    switches = count_switches(joints)
    sig: dict[str, list[float]] = {}
    for f in frames:
        for j, s in f.diagnostics.get("sigmas", {}).items():
            sig.setdefault(j, []).append(s)
    lat = [f.t - f.joint_config.timestamp for f in frames if f.joint_config is not None]
    out = {
        "frames": len(frames),
        "duration_seconds": duration,
        "attention_switches": switches,
        "switches_per_minute": switches / (duration / 60.0) if duration > 0 else 0.0,
        "sigma": {j: {"mean": float(np.mean(v)), "max": float(np.max(v))} for j, v in sig.items()},
        "mean_latency_seconds": float(np.mean(lat)) if lat else None,
        "limit_hits": sum(int(f.diagnostics.get("limit_hits", 0)) for f in frames),
        "payload_violations": sum(1 for f in frames if not payload_ok(f)),
        "frames_per_second": None,
    }
    if timing is not None:
        out["frames_per_second"] = timing.get("frames_per_second")
        out["wall_seconds"] = timing.get("wall_seconds")
    return out


def read_trace(lines: Iterable[str]) -> list[EngagementFrame]:
    return [EngagementFrame.from_record(json.loads(l)) for l in lines if l.strip()]
