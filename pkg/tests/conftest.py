import math
import sys

import numpy as np
import pytest

from engage.robot_model import bundled_models, load_model
from engage.scenes import bundled_clips


def hom(r=None, t=(0.0, 0.0, 0.0)):
    """4x4 homogeneous matrix, the independent oracle for rigid transforms."""
    m = np.eye(4)
    if r is not None:
        m[:3, :3] = r
    m[:3, 3] = t
    return m


def rx(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def ry(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def rz(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def random_rotation(rng):
    # QR of a Gaussian matrix, sign-fixed, gives a Haar-random rotation
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@pytest.fixture(scope="session")
def humanoid_model():
    return load_model(bundled_models()["humanoid_upper_body"])


@pytest.fixture(scope="session")
def arm_model():
    return load_model(bundled_models()["single_arm"])


@pytest.fixture(scope="session")
def clips():
    return bundled_clips()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[2])):
            terminalreporter.write_line(line)
