"""Engagement cues for robot learning from demonstration.

Particle-filter attention over tracked joints, DoF-truncated imitation of
joint rotations with a mirroring delay, and an engine that runs either,
both or neither over a pose stream.
"""

from .attention import (AttentionConfig, AttentionOutput, InstantAttention, ParticleCloud,
                        predict, resample, to_robot_frame, update_sigma, weigh)
from .engine import EngagementFrame, Engine, Mode, metrics, run
from .geometry import EulerAngles, Transform3, compose, convert_to_euler, euler_to_rotation
from .imitation import (DelayBuffer, JointConfig, JointCorrespondence, approximate_imitation,
                        build_correspondence, delayed, rotate_align, translate_align)
from .ingest import PoseFrame, PoseStream, load_bvh, parse_bvh, read_stream, write_bvh
from .robot_model import RobotModel, load_model
from .skeleton import (PosePosition, PoseTransform, SkeletonTopology, to_position_form,
                       to_transform_form)

__version__ = "0.1.0"
