from collections import namedtuple

import numpy as np
import pytest

from motion import dq, tsia
from motion.config import get_settings
from motion.kinematics import load_robot


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def _random_pose(rng, scale=1.0):
    r = rng.normal(size=4)
    r /= np.linalg.norm(r)
    return dq.from_rotation_translation(r, rng.uniform(-scale, scale, size=3))


@pytest.fixture
def random_pose(rng):
    """Factory for random unit dual quaternions with translations in [-scale, scale]."""

    def factory(scale=1.0):
        return _random_pose(rng, scale)

    return factory


@pytest.fixture
def random_config(rng):
    def factory(model):
        return rng.uniform(model.lower, model.upper)

    return factory


@pytest.fixture(scope="session")
def planar2():
    return load_robot("planar2")


@pytest.fixture(scope="session")
def planar3():
    return load_robot("planar3")


@pytest.fixture(scope="session")
def spatial7():
    return load_robot("spatial7")


@pytest.fixture(scope="session", params=["planar2", "planar3", "spatial7"])
def model(request):
    return load_robot(request.param)


# Pouring: carry the cup 0.2 m along x, then tilt it about a fixed horizontal axis
POUR_AXIS = np.array([0.0, 1.0, 0.0])
POUR_STEPS = 20
POUR_STEP_ANGLE = 0.05

Pouring = namedtuple("Pouring", ["demo", "point", "axis"])


def pour_rotation(point, angle):
    return dq.from_screw(POUR_AXIS, np.cross(point, POUR_AXIS), angle, 0.0)


@pytest.fixture
def pouring():
    """Demonstration with the tilt in its second half, plus the tilt axis line."""

    down = np.array([0.0, 1.0, 0.0, 0.0])
    start = np.array([0.5, -0.1, 0.3])
    poses = [
        dq.from_rotation_translation(down, start + [0.2 * k / (POUR_STEPS - 1), 0.0, 0.0])
        for k in range(POUR_STEPS)
    ]
    carried = poses[-1]
    point = dq.translation(carried) + [0.05, 0.0, 0.0]
    poses += [
        pour_rotation(point, POUR_STEP_ANGLE * j) * carried for j in range(1, POUR_STEPS + 1)
    ]
    return Pouring(tsia.PosePath(poses), point, POUR_AXIS)


@pytest.fixture
def settings(tmp_path):
    return get_settings(overrides={"OUTPUT_DIR": str(tmp_path / "run"), "LOG_LEVEL": "DEBUG"})
