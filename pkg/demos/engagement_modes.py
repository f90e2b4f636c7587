"""Four engagement modes over the same clip, plus the CLI round trip.

Run: python demos/engagement_modes.py
"""

# %% Setup
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import engage
from engage import Mode, load_bvh, load_model
from engage.engine import correspondence_for, load_config, metrics, run_to_list
from engage.scenes import bundled_clips

data = Path(engage.__file__).parent / "data"
stream = load_bvh(bundled_clips()["swimming_synthetic"])
model = load_model(data / "models" / "humanoid_upper_body.json")
cfg = load_config(data / "humanoid_config.json", seed=0)
corr = correspondence_for(cfg.correspondence, model, stream.topology)

# %% Run each mode and summarize
for mode in Mode:
    frames, summary = run_to_list(mode, stream, model, corr, cfg.attention, cfg.delay)
    m = metrics(frames, summary.to_record())
    print(f"{mode.value:10s} {m['frames']} frames  switches {m['attention_switches']:3d}  "
          f"latency {m['mean_latency_seconds']}  payload violations {m['payload_violations']}  "
          f"{m['frames_per_second']:.0f} fps")

# %% Where does the robot look? Attention counts per joint in BOTH mode
frames, _ = run_to_list(Mode.BOTH, stream, model, corr, cfg.attention, cfg.delay)
counts = {}
for f in frames:
    counts[f.attention.joint] = counts.get(f.attention.joint, 0) + 1
for j, c in sorted(counts.items(), key=lambda kv: -kv[1])[:5]:
    print(f"  {j:14s} {c} frames")
print("one trace line:", frames[45].to_json()[:160], "...")

# %% The same run through the command line
with tempfile.TemporaryDirectory() as d:
    trace = Path(d) / "trace.ndjson"
    cmd = [sys.executable, "-m", "engage.cli"]
    subprocess.run(cmd + ["run", "--mode", "both", "--input",
                          str(bundled_clips()["swimming_synthetic"]), "--model",
                          str(data / "models" / "humanoid_upper_body.json"), "--config",
                          str(data / "humanoid_config.json"), "--seed", "0", "--out", str(trace),
                          "--summary", str(Path(d) / "summary.json")], check=True)
    same = trace.read_text().splitlines() == [f.to_json() for f in frames]
    print("CLI trace matches the library run:", same)
    out = subprocess.run(cmd + ["metrics", "--trace", str(trace)], check=True,
                         capture_output=True, text=True).stdout
    print("switches per minute:", round(json.loads(out)["switches_per_minute"], 1))
