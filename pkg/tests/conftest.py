import numpy as np
import pytest

from frustreg.camera import CameraModel
from frustreg.liegroup import Twist, exp_map


@pytest.fixture
def cam():
    return CameraModel()


def random_twist(rng, max_angle=np.pi - 1e-3, max_trans=5.0):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    omega = axis * rng.uniform(0.0, max_angle)
    return Twist(rng.uniform(-max_trans, max_trans, 3), omega)


def random_pose(rng, max_angle=np.pi - 0.1):
    return exp_map(random_twist(rng, max_angle))


def twist_hat(xi):
    v = np.asarray(xi, dtype=float)
    m = np.zeros((4, 4))
    w = v[3:]
    m[:3, :3] = [[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]]
    m[:3, 3] = v[:3]
    return m


def series_exp(xi, terms=30):
    """Truncated power series of the 4x4 twist matrix."""
    A = twist_hat(xi)
    out = np.eye(4)
    term = np.eye(4)
    for k in range(1, terms):
        term = term @ A / k
        out = out + term
    return out


def pytest_terminal_summary(terminalreporter):
    import sys

    acc = sys.modules.get("test_acceptance")
    if acc is None or not acc.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(acc.RESULTS):
        terminalreporter.write_line(acc.RESULTS[number])
