"""Serial manipulator forward kinematics and the dual quaternion pose Jacobian.

Chains are described product-of-exponentials style: each joint is a screw
given in the home configuration (all joints at zero), expressed in the base
frame. Forward kinematics is

    x(q) = base · exp(½ q1 s1) ··· exp(½ qn sn) · ee_offset

where ``s_i = l_i + ε (point_i × l_i)`` for a revolute joint and
``s_i = ε l_i`` for a prismatic one.
"""

import logging
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import dq
from .exceptions import DimensionError, InvalidPoseError, ModelError

logger = logging.getLogger(__name__)

ROBOTS_DIR = os.path.join(os.path.dirname(__file__), "robots")

REVOLUTE = "revolute"
PRISMATIC = "prismatic"
JOINT_TYPES = (REVOLUTE, PRISMATIC)


@dataclass(frozen=True, eq=False)
class Joint:
    type: str
    axis: np.ndarray
    point: np.ndarray
    lower: float
    upper: float

    def screw(self):
        """Joint screw as a pure dual quaternion."""

        if self.type == PRISMATIC:
            return dq.DualQuaternion(np.zeros(4), dq.pure(self.axis))
        moment = np.cross(self.point, self.axis)
        return dq.DualQuaternion(dq.pure(self.axis), dq.pure(moment))


@dataclass(frozen=True, eq=False)
class SerialManipulator:
    name: str
    joints: tuple
    base: dq.UnitDualQuaternion = dq.IDENTITY
    ee_offset: dq.UnitDualQuaternion = dq.IDENTITY
    qdot_max: np.ndarray = None
    screws: tuple = field(init=False, repr=False)

    def __post_init__(self):
        for i, joint in enumerate(self.joints):
            if joint.type not in JOINT_TYPES:
                raise ModelError(f"{self.name}: joint {i} has unknown type {joint.type}")
            if not joint.lower < joint.upper:
                raise ModelError(
                    f"{self.name}: joint {i} limits are inconsistent "
                    f"({joint.lower} >= {joint.upper})"
                )
        object.__setattr__(self, "screws", tuple(j.screw() for j in self.joints))

    @property
    def dof(self):
        return len(self.joints)

    @property
    def lower(self):
        return np.array([j.lower for j in self.joints])

    @property
    def upper(self):
        return np.array([j.upper for j in self.joints])

    @property
    def mid_range(self):
        return 0.5 * (self.lower + self.upper)

    def with_base(self, base):
        return SerialManipulator(
            self.name, self.joints, base, self.ee_offset, self.qdot_max
        )

    def home_pose(self):
        return self.base * self.ee_offset


def _check_config(model, q):
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.shape != (model.dof,):
        raise DimensionError(
            f"{model.name} has {model.dof} joints, got a configuration of size {q.size}"
        )
    return q


def _joint_exponentials(model, q):
    return [dq.exp(0.5 * qi * s) for qi, s in zip(q, model.screws)]


def forward_kinematics(model, q):
    q = _check_config(model, q)

    x = model.base
    for e in _joint_exponentials(model, q):
        x = x * e
    return x * model.ee_offset


def pose_jacobian(model, q):
    """8 x n Jacobian with vec(dx/dt) = J dq/dt.

    Column i is vec(½ s'_i · x) where s'_i is joint screw i carried to its
    current placement by the transforms of the joints before it.
    """

    return pose_and_jacobian(model, q)[1]


def pose_and_jacobian(model, q):
    q = _check_config(model, q)

    exponentials = _joint_exponentials(model, q)
    x = model.base
    for e in exponentials:
        x = x * e
    x = x * model.ee_offset

    h = dq.hamilton_minus(x)
    jac = np.zeros((8, model.dof))
    g = model.base
    for i, (s, e) in enumerate(zip(model.screws, exponentials)):
        placed = g * s * g.conj()
        jac[:, i] = h @ (0.5 * placed.vec())
        g = g * e
    return x, jac


def translation_jacobian(x, jac):
    """3 x n Jacobian of the end-effector position, from the pose Jacobian at x.

    p = 2 D P*, so dp = 2 (H+(D) C4 dP + H−(P*) dD).
    """

    c4 = np.diag([1.0, -1.0, -1.0, -1.0])
    left = dq.quat_hamilton_plus(x.dual) @ c4
    right = dq.quat_hamilton_minus(dq.qconj(x.primary))
    jt = 2.0 * np.hstack([left, right]) @ jac
    return jt[1:]


# DH-to-screw conversion for fixture authoring


def _dh_transform(a, alpha, d, theta):
    rz = dq.from_rotation_translation(dq.quat_from_axis_angle([0, 0, 1], theta), [0, 0, 0])
    tz = dq.from_translation([0.0, 0.0, d])
    tx = dq.from_translation([a, 0.0, 0.0])
    rx = dq.from_rotation_translation(dq.quat_from_axis_angle([1, 0, 0], alpha), [0, 0, 0])
    return rz * tz * tx * rx


def joints_from_dh(rows, types=None, limits=None):
    """Convert standard DH rows (a, alpha, d, theta) into home-configuration screws.

    Returns the joints and the end-effector pose at the home configuration.
    Joint i moves about (or along) the z axis of frame i-1.
    """

    types = types or [REVOLUTE] * len(rows)
    limits = limits or [(-np.pi, np.pi)] * len(rows)

    joints = []
    frame = dq.IDENTITY
    for (a, alpha, d, theta), jtype, (lower, upper) in zip(rows, types, limits):
        axis = dq.transform_point(frame, [0.0, 0.0, 1.0]) - frame.translation()
        joints.append(
            Joint(jtype, axis, frame.translation(), float(lower), float(upper))
        )
        frame = frame * _dh_transform(a, alpha, d, theta)
    return joints, frame


def load_robot(model_file):
    """Load a robot model from a YAML file or a bundled model name."""

    path = model_file
    if not os.path.exists(path):
        bundled = os.path.join(ROBOTS_DIR, f"{model_file}.yaml")
        if not os.path.exists(bundled):
            raise ModelError(f"Robot model not found: {model_file}")
        path = bundled

    try:
        with open(path, "r") as file:
            data = yaml.safe_load(file)
    except yaml.YAMLError as e:
        raise ModelError(f"Could not parse robot model {path}: {e}") from e

    if not isinstance(data, dict):
        raise ModelError(f"Robot model {path} is not a mapping")

    name = data.get("name", os.path.splitext(os.path.basename(path))[0])

    try:
        base = dq.pose_from_values(data.get("base", [1, 0, 0, 0, 0, 0, 0, 0]))

        if "dh" in data:
            records = data["dh"]
            joints, home = joints_from_dh(
                [r["params"] for r in records],
                [r.get("type", REVOLUTE) for r in records],
                [r["limits"] for r in records],
            )
            ee_offset = home * dq.pose_from_values(
                data.get("ee_offset", [1, 0, 0, 0, 0, 0, 0, 0])
            )
        else:
            joints = []
            for record in data["joints"]:
                axis = np.asarray(record["axis"], dtype=float)
                axis = axis / np.linalg.norm(axis)
                lower, upper = record["limits"]
                joints.append(
                    Joint(
                        record.get("type", REVOLUTE),
                        axis,
                        np.asarray(record.get("point", [0, 0, 0]), dtype=float),
                        float(lower),
                        float(upper),
                    )
                )
            ee_offset = dq.pose_from_values(data["ee_offset"])
    except (KeyError, TypeError, ValueError, InvalidPoseError) as e:
        raise ModelError(f"Invalid robot model {path}: {e}") from e

    dof = data.get("dof", len(joints))
    if dof != len(joints):
        raise ModelError(f"{name}: dof is {dof} but {len(joints)} joints are described")

    qdot_max = data.get("qdot_max")
    if qdot_max is not None:
        qdot_max = np.broadcast_to(np.asarray(qdot_max, dtype=float), (dof,)).copy()

    model = SerialManipulator(name, tuple(joints), base, ee_offset, qdot_max)
    logger.debug(f"Loaded robot {name} ({dof} DoF) from {path}")
    return model
