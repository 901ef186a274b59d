"""Reading and writing demonstrations and joint trajectories.

A demonstration file has one pose per line, either the 8 dual quaternion
coefficients or ``tx ty tz qw qx qy qz``, separated by spaces or commas.
Empty lines and ``#`` comments are skipped. A joint trajectory file has one
configuration per line in the same layout.
"""

import logging
import re

import numpy as np

from . import dq
from .exceptions import InvalidPoseError, ModelError
from .tsia import DEMONSTRATED, PosePath

logger = logging.getLogger(__name__)

SEPARATOR = re.compile(r"[,\s]+")


def format_float(value):
    """17 significant digits, enough to read back the same double."""

    return f"{float(value):.17g}"


def format_vector(values):
    return " ".join(format_float(v) for v in np.asarray(values).reshape(-1))


def _rows(path):
    try:
        with open(path, "r") as file:
            lines = file.readlines()
    except OSError as e:
        raise ModelError(f"Could not read {path}: {e}") from e

    for number, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            yield number, [float(v) for v in SEPARATOR.split(line) if v]
        except ValueError as e:
            raise ModelError(f"{path}:{number}: {e}") from e


def load_demo(path, min_length=2):
    poses = []
    for number, values in _rows(path):
        try:
            poses.append(dq.pose_from_values(values))
        except InvalidPoseError as e:
            raise ModelError(f"{path}:{number}: {e}") from e

    logger.debug(f"Read {len(poses)} demonstration poses from {path}")
    return PosePath(poses, DEMONSTRATED, min_length=min_length)


def save_demo(path, demo):
    with open(path, "w") as file:
        file.write("# pw px py pz dw dx dy dz\n")
        for pose in demo:
            file.write(format_vector(pose.vec()) + "\n")


def load_joint_trajectory(path, dof=None):
    rows = [values for _, values in _rows(path)]
    if not rows:
        raise ModelError(f"{path} holds no joint configurations")
    widths = {len(r) for r in rows}
    if len(widths) != 1 or (dof is not None and widths != {dof}):
        raise ModelError(
            f"{path}: expected {dof or 'equal'} values per line, got {sorted(widths)}"
        )
    return np.array(rows)


def load_pose(value):
    """Pose from a list of 7 or 8 numbers, or a comma separated string of them."""

    if isinstance(value, str):
        value = [v for v in SEPARATOR.split(value.strip()) if v]
    return dq.pose_from_values(value)
