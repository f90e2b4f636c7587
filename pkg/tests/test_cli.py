import json
import subprocess
import sys
from pathlib import Path

import pytest

import engage
from engage.cli import main
from engage.ingest import load_bvh, write_ndjson

DATA = Path(engage.__file__).parent / "data"
MODEL = DATA / "models" / "humanoid_upper_body.json"
CONFIG = DATA / "humanoid_config.json"
CLIP = DATA / "clips" / "rowing_synthetic.bvh"
INVALID = Path(__file__).parent / "data" / "invalid_models"


def engage_run(tmp_path, name, *extra, clip=CLIP, config=CONFIG):
    out = tmp_path / f"{name}.ndjson"
    code = main(["run", "--mode", "both", "--input", str(clip), "--model", str(MODEL),
                 "--config", str(config), "--seed", "3", "--out", str(out),
                 "--summary", str(tmp_path / f"{name}.summary.json"), *extra])
    return code, out


def test_run_is_byte_identical(tmp_path):
    c1, a = engage_run(tmp_path, "a")
    c2, b = engage_run(tmp_path, "b")
    c3, c = engage_run(tmp_path, "c", "--workers", "4")
    assert c1 == c2 == c3 == 0
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()
    assert len(a.read_text().splitlines()) == len(load_bvh(CLIP))


def test_seed_changes_trace(tmp_path):
    _, a = engage_run(tmp_path, "a")
    _, b = engage_run(tmp_path, "b", "--seed", "4")
    assert a.read_bytes() != b.read_bytes()


def test_metrics_command(tmp_path, capsys):
    _, trace = engage_run(tmp_path, "a")
    capsys.readouterr()
    assert main(["metrics", "--trace", str(trace),
                 "--summary", str(tmp_path / "a.summary.json")]) == 0
    m = json.loads(capsys.readouterr().out)
    assert m["frames"] == 120 and m["payload_violations"] == 0
    assert m["frames_per_second"] > 0


def test_validate_command(capsys):
    assert main(["validate", "--model", str(MODEL)]) == 0
    assert "LShoulder(dof 2)" in capsys.readouterr().out


def test_validate_invalid_model_is_config_error(capsys):
    assert main(["validate", "--model", str(INVALID / "dof_kept_mismatch.json")]) == 2
    assert "kept_axes" in capsys.readouterr().err


def test_missing_model_for_imitation(tmp_path):
    assert main(["run", "--mode", "imitation", "--input", str(CLIP), "--config", str(CONFIG),
                 "--out", str(tmp_path / "t")]) == 2


def test_bad_config_is_config_error(tmp_path):
    bad = tmp_path / "cfg.json"
    bad.write_text(json.dumps({"attention": {"tracked": []}}))
    assert main(["run", "--mode", "attention", "--input", str(CLIP), "--config", str(bad),
                 "--out", str(tmp_path / "t")]) == 2


def test_unknown_correspondence_joint_is_config_error(tmp_path):
    cfg = json.loads(CONFIG.read_text())
    cfg["correspondence"].append({"human": "Tail", "robot": "Hip2"})
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    code, _ = engage_run(tmp_path, "a", config=path)
    assert code == 2


def test_truncated_input_is_input_error(tmp_path):
    cut = tmp_path / "cut.bvh"
    cut.write_text(CLIP.read_text()[:2000])
    assert engage_run(tmp_path, "a", clip=cut)[0] == 1
    assert main(["run", "--input", str(tmp_path / "nope.bvh"), "--config", str(CONFIG),
                 "--model", str(MODEL)]) == 1


def test_missing_trace_is_input_error(tmp_path):
    assert main(["metrics", "--trace", str(tmp_path / "nope")]) == 1
    empty = tmp_path / "empty.ndjson"
    empty.write_text("")
    assert main(["metrics", "--trace", str(empty)]) == 1


def test_ndjson_input_with_config_skeleton(tmp_path):
    stream = load_bvh(CLIP)
    topo = stream.topology
    nd = tmp_path / "clip.ndjson"
    nd.write_text(write_ndjson(stream) + "{broken\n")
    cfg = json.loads(CONFIG.read_text())
    cfg["skeleton"] = {"parent": dict(topo.parent),
                       "rest_offset_meters": {j: list(v) for j, v in topo.rest_offset.items()}}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    code, out = engage_run(tmp_path, "nd", clip=nd, config=cfg_path)
    assert code == 0
    _, ref = engage_run(tmp_path, "bvh")
    assert out.read_bytes() == ref.read_bytes()
    summary = json.loads((tmp_path / "nd.summary.json").read_text())
    assert summary["rejected_lines"] == 1


def test_console_script_and_stdin(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "engage.cli", "run", "--mode", "attention", "--input", "-",
         "--format", "bvh", "--config", str(CONFIG), "--seed", "3"],
        input=CLIP.read_bytes(), capture_output=True, env={"ENGAGE_LOG": "INFO", "PATH": ""})
    assert proc.returncode == 0, proc.stderr
    lines = proc.stdout.decode().splitlines()
    assert len(lines) == 120
    assert json.loads(lines[0])["mode"] == "attention"
    assert b"run summary" in proc.stderr
