"""From a mocap clip to robot joint angles, step by step.

Run: python demos/imitation_pipeline.py
"""

# %% Load a clip and the bundled Pepper-like robot description
import numpy as np

from engage import load_bvh, load_model
from engage.geometry import convert_to_euler
from engage.imitation import (DelayBuffer, aligned_transform, approximate_imitation,
                              build_correspondence)
from engage.robot_model import bundled_models
from engage.scenes import bundled_clips

stream = load_bvh(bundled_clips()["boxing_synthetic"])
model = load_model(bundled_models()["humanoid_upper_body"])
print(f"{len(stream)} frames at {1 / stream.frame_period:.0f} Hz, "
      f"{len(stream.topology.joints)} human joints")
for j in model.joints:
    print(f"  robot {j.name:10s} dof {j.dof}  keeps {', '.join(j.kept_axes)}")

# %% Alignment is computed once, at the calibration pose
pairs = [("LeftArm", "LShoulder"), ("LeftForeArm", "LElbow"), ("LeftHand", "LWrist")]
corr = build_correspondence(pairs, stream.topology, model)
for p in corr.pairs:
    print(f"{p.human:12s} -> {p.robot:10s} rotate_align:\n{np.round(p.rotate_align.rotation, 3)}")

# %% One frame through the pipeline: align, decompose, truncate, clamp
frame = stream.frames[20].transform
pair = corr.pairs[0]
full = convert_to_euler(aligned_transform(pair, frame[pair.human]))
print("\nfull roll/pitch/yaw of the aligned shoulder:", np.round(full, 4))
cfg = approximate_imitation(corr, frame, model)
print("what the 2-DoF shoulder receives:          ", np.round(cfg.angles["LShoulder"], 4))
print("limit hits in this frame:", cfg.limit_hits)

# %% The mirroring delay: 1.0 s at 30 Hz is a 30-frame buffer
buf = DelayBuffer(1.0)
released = []
for f in stream:
    for src_t, jc in buf.push(f.t, approximate_imitation(corr, f.transform, model)):
        released.append((f.t, src_t))
print(f"\nfirst output at t = {released[0][0]:.3f} s for the pose from t = {released[0][1]:.3f} s;"
      f" {len(buf)} configurations in flight at the end")
