import io
import json
import math
from pathlib import Path

import numpy as np
import pytest

import engage

from engage.attention import AttentionConfig
from engage.engine import Mode, correspondence_for, load_config, run_to_list
from engage.errors import ChannelMismatch, ParseError, TopologyMismatch
from engage.ingest import (PoseStream, frame_record, load_bvh, load_ndjson, parse_bvh,
                           read_stream, write_bvh, write_ndjson)
from engage.scenes import clip_bvh
from engage.skeleton import to_position_form

from conftest import hom, rx, ry, rz

DATA_DIR = Path(engage.__file__).parent / "data"

ONE_JOINT = """HIERARCHY
ROOT Hips
{
  OFFSET 0.0 0.0 0.0
  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
}
MOTION
Frames: 1
Frame Time: 0.0333333
0 0 0 0 0 0
"""

TWO_JOINT = """HIERARCHY
ROOT Hips
{
  OFFSET 0.0 0.0 0.0
  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
  JOINT Chest
  {
    OFFSET 0.0 2.0 0.0
    CHANNELS 3 Zrotation Xrotation Yrotation
    End Site
    {
      OFFSET 0.0 1.0 0.0
    }
  }
}
MOTION
Frames: 2
Frame Time: 0.0333333
0 0 0 90 0 0 0 0 0
1 2 3 0 0 0 0 0 0
"""


def test_one_joint_rest_pose():
    s = parse_bvh(ONE_JOINT)
    assert len(s) == 1 and s.topology.joints == ("Hips",)
    t = s.frames[0].transform["Hips"]
    np.testing.assert_array_equal(t.rotation, np.eye(3))
    np.testing.assert_array_equal(t.translation, [0, 0, 0])
    assert s.frame_period == pytest.approx(0.0333333)


def test_two_joint_root_rotation_matches_fk_oracle():
    s = parse_bvh(TWO_JOINT)
    assert s.topology.joints == ("Hips", "Chest", "Chest_End")
    pos = s.frames[0].position
    np.testing.assert_allclose(pos["Chest"], [-2.0, 0, 0], atol=1e-12)
    want = (hom(rz(math.pi / 2)) @ hom(t=(0, 2, 0)) @ hom(t=(0, 1, 0)))[:3, 3]
    np.testing.assert_allclose(pos["Chest_End"], want, atol=1e-12)
    # position channels add to the root offset
    np.testing.assert_allclose(s.frames[1].position["Chest"], [1, 4, 3], atol=1e-12)
    assert s.frames[1].t == pytest.approx(0.0333333)


@pytest.mark.parametrize("order", ["XYZ", "ZXY", "YZX", "ZYX"])
def test_channel_order_is_honored(order):
    mats = {"X": rx, "Y": ry, "Z": rz}
    angles = {"X": 10.0, "Y": -25.0, "Z": 40.0}
    chans = " ".join(f"{a}rotation" for a in order)
    text = ONE_JOINT.replace("Zrotation Xrotation Yrotation", chans).replace(
        "0 0 0 0 0 0", "0 0 0 " + " ".join(str(angles[a]) for a in order))
    want = np.eye(3)
    for a in order:
        want = want @ mats[a](math.radians(angles[a]))
    got = parse_bvh(text).frames[0].transform["Hips"].rotation
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_rename_and_scale():
    s = parse_bvh(TWO_JOINT, rename={"Chest": "Spine"}, scale=0.01)
    assert "Spine" in s.topology.joints
    np.testing.assert_allclose(s.topology.rest_offset["Spine"], [0, 0.02, 0])
    np.testing.assert_allclose(s.frames[1].position["Spine"], [0.01, 0.04, 0.03], atol=1e-12)


@pytest.mark.parametrize("cut", [40, 120, len(TWO_JOINT) - 12])
def test_truncated_file(cut):
    with pytest.raises(ParseError):
        parse_bvh(TWO_JOINT[:cut])


def test_parse_error_carries_line():
    bad = TWO_JOINT.replace("OFFSET 0.0 2.0 0.0", "OFFSET 0.0 two 0.0")
    with pytest.raises(ParseError) as info:
        parse_bvh(bad)
    assert info.value.line == 8
    assert "line 8" in str(info.value)


def test_channel_mismatch():
    bad = TWO_JOINT.replace("1 2 3 0 0 0 0 0 0", "1 2 3 0 0 0 0 0")
    with pytest.raises(ChannelMismatch):
        parse_bvh(bad)
    with pytest.raises(ParseError):
        parse_bvh(TWO_JOINT.replace("CHANNELS 3 Zrotation", "CHANNELS 3 Wrotation"))


def test_frame_count_mismatch():
    with pytest.raises(ParseError):
        parse_bvh(TWO_JOINT.replace("Frames: 2", "Frames: 3"))


def _assert_streams_equal(a: PoseStream, b: PoseStream, atol):
    assert a.topology.joints == b.topology.joints
    assert len(a) == len(b)
    for fa, fb in zip(a, b):
        assert abs(fa.t - fb.t) <= atol
        for j in a.topology.joints:
            np.testing.assert_allclose(fa.transform[j].rotation, fb.transform[j].rotation,
                                       atol=atol, rtol=0)
            np.testing.assert_allclose(fa.transform[j].translation, fb.transform[j].translation,
                                       atol=atol, rtol=0)


def test_bvh_round_trip(clips):
    for path in clips.values():
        s = load_bvh(path)
        again = parse_bvh(write_bvh(s))
        _assert_streams_equal(s, again, 1e-9)
        assert again.channels == s.channels


# NDJSON

def line(t, joints):
    return json.dumps({"t": t, "joints": joints})


def test_two_valid_lines():
    src = [line(0.0, {"a": {"pos": [0, 0, 1]}}), line(0.1, {"a": {"pos": [0, 0, 2]}})]
    s = load_ndjson(src)
    assert len(s) == 2 and s.rejected == []
    np.testing.assert_array_equal(s.frames[1].position["a"], [0, 0, 2])


@pytest.mark.parametrize("bad", [
    "{not json",
    json.dumps([1, 2]),
    line("x", {"a": {"pos": [0, 0, 0]}}),
    line(0.05, {"a": {"pos": [0, 0]}}),
    line(0.05, {"a": {"pos": [0, 0, 0], "rot": [1, 0, 0]}}),
    line(0.05, {"a": {"pos": [0, 0, 0], "rot": [2, 0, 0, 0, 1, 0, 0, 0, 1]}}),
    line(0.05, {}),
    line(0.0, {"a": {"pos": [0, 0, 0]}}),  # repeats the previous timestamp
])
def test_malformed_line_is_skipped_with_diagnostic(bad):
    src = [line(0.0, {"a": {"pos": [0, 0, 1]}}), bad, line(0.1, {"a": {"pos": [0, 0, 2]}})]
    s = load_ndjson(src)
    assert len(s) == 2
    assert len(s.rejected) == 1 and s.rejected[0][0] == 2


def test_joint_set_change_raises():
    src = [line(0.0, {"a": {"pos": [0, 0, 1]}}), line(0.1, {"b": {"pos": [0, 0, 2]}})]
    with pytest.raises(TopologyMismatch):
        load_ndjson(src)


def test_topology_mismatch_against_skeleton():
    topo = parse_bvh(TWO_JOINT).topology
    with pytest.raises(TopologyMismatch):
        load_ndjson([line(0.0, {"Hips": {"pos": [0, 0, 0]}})], topo)


def test_reader_is_incremental():
    produced = []

    def source():
        for k in range(3):
            produced.append(k)
            yield line(k * 0.1, {"a": {"pos": [k, 0, 0]}})

    reader = read_stream(source())
    it = iter(reader)
    next(it)
    assert produced == [0]


def test_ndjson_rename():
    s = load_ndjson([line(0.0, {"hip": {"pos": [0, 0, 0]}})], rename={"hip": "Hips"})
    assert s.frames[0].joints == ("Hips",)


def test_positions_only_with_topology_fit_transforms():
    bvh = parse_bvh(clip_bvh("boxing", seconds=0.5))
    text = write_ndjson(bvh, with_rot=False)
    s = load_ndjson(io.StringIO(text), bvh.topology)
    for fa, fb in zip(bvh, s):
        again = to_position_form(fb.transform, bvh.topology)
        for j in bvh.topology.joints:
            assert np.linalg.norm(again[j] - fa.position[j]) < 1e-6


def test_ndjson_record_shape():
    s = parse_bvh(TWO_JOINT)
    rec = frame_record(s.frames[0])
    assert set(rec) == {"t", "joints"}
    assert set(rec["joints"]["Chest"]) == {"pos", "rot"}
    assert len(rec["joints"]["Chest"]["rot"]) == 9


def test_cross_path_equivalence(humanoid_model):
    cfg = load_config(DATA_DIR / "humanoid_config.json", seed=5)
    bvh = parse_bvh(clip_bvh("swimming", seconds=1000 / 30, seed=2))
    assert len(bvh) == 1000
    nd = load_ndjson(io.StringIO(write_ndjson(bvh)), bvh.topology)
    traces = []
    for stream in (bvh, nd):
        corr = correspondence_for(cfg.correspondence, humanoid_model, stream.topology)
        frames, _ = run_to_list(Mode.BOTH, stream, humanoid_model, corr, cfg.attention, cfg.delay)
        traces.append([f.to_json() for f in frames])
    assert traces[0] == traces[1]
