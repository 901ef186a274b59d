"""Dual quaternion kinematic controller.

The error ``e = 1 - x_m* x_d`` is driven to zero through the extended
Jacobian ``N = -H−(x_d) C8 J``, which maps joint velocities onto vec(de/dt):

    dq/dt = -λ_e N⁺ vec(e)

Joint-limit avoidance runs in the nullspace of N, and near an obstacle the
desired pose is flattened onto the tangent plane of the surface while any
commanded velocity into the surface is removed.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import dq, kinematics, repet, settings
from .exceptions import ConfigError, DegenerateGeometryError, NonConvergenceError

logger = logging.getLogger(__name__)

PINV_RCOND = 1e-10
IDENTITY_VEC = dq.IDENTITY.vec()


@dataclass
class ControllerParams:
    lambda_e: float = settings.LAMBDA_E
    damping: float = settings.DAMPING
    dt: float = settings.DT
    qdot_max: object = settings.QDOT_MAX
    nullspace_gain: float = settings.NULLSPACE_GAIN
    safety_margin: float = settings.SAFETY_MARGIN
    literal_obstacle_law: bool = settings.LITERAL_OBSTACLE_LAW

    def __post_init__(self):
        if self.lambda_e <= 0.0:
            raise ConfigError(f"lambda_e must be positive, got {self.lambda_e}")
        if self.dt <= 0.0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.damping < 0.0 or self.nullspace_gain < 0.0:
            raise ConfigError("damping and nullspace_gain must not be negative")

    @classmethod
    def from_settings(cls, settings):
        qdot_max = settings.get("QDOT_MAX")
        return cls(
            lambda_e=settings.getfloat("LAMBDA_E"),
            damping=settings.getfloat("DAMPING"),
            dt=settings.getfloat("DT"),
            qdot_max=None if qdot_max is None else float(qdot_max),
            nullspace_gain=settings.getfloat("NULLSPACE_GAIN"),
            safety_margin=settings.getfloat("SAFETY_MARGIN"),
            literal_obstacle_law=settings.getbool("LITERAL_OBSTACLE_LAW"),
        )

    def velocity_limits(self, model):
        """Per-joint limits: ``qdot_max`` when set, else the model limits, else none."""

        if self.qdot_max is not None:
            return np.broadcast_to(np.asarray(self.qdot_max, dtype=float), (model.dof,))
        if model.qdot_max is not None:
            return np.asarray(model.qdot_max, dtype=float)
        return np.full(model.dof, np.inf)


@dataclass(eq=False)
class ControlState:
    q: np.ndarray
    x_m: dq.UnitDualQuaternion
    v_ee: np.ndarray = field(default_factory=lambda: np.zeros(3))


def _relative(x_m, x_d):
    """x_d on the hemisphere where x_m* x_d has a non-negative scalar part."""

    return x_d if (x_m.conj() * x_d).primary[0] >= 0.0 else -x_d


def spatial_error(x_m, x_d):
    x_e = dq.shortest(x_m.conj() * x_d)
    return IDENTITY_VEC - x_e.vec()


def extended_jacobian(x_d, jac):
    return -dq.hamilton_minus(x_d) @ dq.C8 @ jac


def damped_pinv(n_matrix, damping):
    """Nᵀ(NNᵀ + λ²I)⁻¹, solved in joint space."""

    if damping == 0.0:
        return np.linalg.pinv(n_matrix, rcond=PINV_RCOND)
    dof = n_matrix.shape[1]
    return np.linalg.solve(
        n_matrix.T @ n_matrix + damping**2 * np.eye(dof), n_matrix.T
    )


def nullspace_joint_limit_task(model, q, primary_N, gain=1.0):
    """Descent on Σ((q - mid)/range)², projected onto the nullspace of N."""

    q = np.asarray(q, dtype=float)
    span = model.upper - model.lower
    gradient = (q - model.mid_range) / span**2
    projector = np.eye(model.dof) - np.linalg.pinv(primary_N, rcond=PINV_RCOND) @ primary_N
    return -gain * projector @ gradient


def limit_velocity(qdot, limits):
    """Scale the whole vector so that no joint exceeds its limit."""

    speed = np.abs(qdot)
    moving = speed > 0.0
    if not moving.any():
        return qdot
    scale = min(1.0, float(np.min(limits[moving] / speed[moving])))
    return qdot * scale


def _body_normal(x_m, eta):
    r = x_m.primary
    return dq.qmul(dq.qmul(dq.qconj(r), dq.pure(eta)), r)[1:]


def obstacle_constrained_desired(x_m, x_d, v_ee, eta_obs, literal=False):
    """Desired pose with its relative translation flattened onto the obstacle tangent plane.

    The relative rotation x_m* x_d is kept. With ``literal`` the desired
    pose is instead recomposed as a rotation-only target plus the tangent
    translation scaled by the end-effector speed, then re-normalized.
    """

    eta = np.asarray(eta_obs, dtype=float)
    norm = np.linalg.norm(eta)
    if norm == 0.0:
        raise DegenerateGeometryError("Obstacle normal has zero length")
    eta_body = _body_normal(x_m, eta / norm)
    projector = np.eye(3) - np.outer(eta_body, eta_body)

    relative = x_m.conj() * _relative(x_m, x_d)
    t_rel = dq.translation(relative)

    if literal:
        half = dq.DualQuaternion(np.zeros(4), dq.pure(0.5 * t_rel))
        rotation_only = x_m * dq.exp(dq.log(relative) - half)
        speed = float(np.linalg.norm(v_ee))
        push = dq.DualQuaternion(np.zeros(4), dq.pure(speed * projector @ (0.5 * t_rel)))
        return dq.normalize(rotation_only + push)

    return x_m * dq.from_rotation_translation(relative.primary, projector @ t_rel)


def _safety_normal(scene, position, v_ee, margin, step):
    """Surface normal of the closest obstacle when ``position`` is inside its shell or margin.

    Returns the normal (None elsewhere), whether the end-effector
    moves towards the surface and whether it is within ``margin`` of it.
    """

    found = repet.closest_obstacle(scene, position, step)
    if found is None:
        return None, False, False
    obstacle, _ = found
    inside = repet.inside_detection_shell(position, obstacle)
    near = obstacle.distance(position) <= margin
    if not (inside or near):
        return None, False, False
    eta = repet.normal_vector(position, obstacle)
    approaching = inside and float(np.dot(v_ee, -eta)) > 0.0
    return eta, approaching, near


def _remove_inward(qdot, eta, x, jac):
    j_eta = eta @ kinematics.translation_jacobian(x, jac)
    rate = float(j_eta @ qdot)
    gain = float(j_eta @ j_eta)
    if rate < 0.0 and gain > 0.0:
        qdot = qdot - j_eta * (rate / gain)
    return qdot


def control_joint_velocities(model, state, x_d, params=None, scene=None, step=0):
    """Joint velocities and whether the obstacle safety layer engaged."""

    params = params or ControllerParams()
    x, jac = kinematics.pose_and_jacobian(model, state.q)

    eta, approaching, near = None, False, False
    if scene is not None and len(scene):
        eta, approaching, near = _safety_normal(
            scene, dq.translation(state.x_m), state.v_ee, params.safety_margin, step
        )
        if approaching:
            x_d = obstacle_constrained_desired(
                state.x_m, x_d, state.v_ee, eta, params.literal_obstacle_law
            )

    x_d = _relative(state.x_m, x_d)
    error = spatial_error(state.x_m, x_d)
    n_matrix = extended_jacobian(x_d, jac)

    qdot = -params.lambda_e * damped_pinv(n_matrix, params.damping) @ error
    if params.nullspace_gain > 0.0:
        qdot = qdot + nullspace_joint_limit_task(
            model, state.q, n_matrix, params.nullspace_gain
        )
    if near:
        qdot = _remove_inward(qdot, eta, x, jac)

    return limit_velocity(qdot, params.velocity_limits(model)), approaching or near


def control_step(model, state, x_d, params=None, scene=None, step=0):
    return control_joint_velocities(model, state, x_d, params, scene, step)[0]


def integrate(q, qdot, dt, model=None):
    """Explicit Euler step, clamped to the joint limits of ``model``.

    Returns the new configuration and whether a limit was hit.
    """

    q_new = np.asarray(q, dtype=float) + dt * np.asarray(qdot, dtype=float)
    if model is None:
        return q_new, False
    clamped = np.clip(q_new, model.lower, model.upper)
    return clamped, bool(np.any(clamped != q_new))


class DQController:
    """Closed-loop controller for one robot, keeping the velocity estimate."""

    def __init__(self, model, params=None, scene=None):
        self.model = model
        self.params = params or ControllerParams()
        self.scene = scene
        self.last_position = None
        self.engaged = False
        self.limit_hit = False

    def state(self, q, x_m):
        position = dq.translation(x_m)
        if self.last_position is None:
            v_ee = np.zeros(3)
        else:
            v_ee = (position - self.last_position) / self.params.dt
        return ControlState(np.asarray(q, dtype=float), x_m, v_ee)

    def step(self, q, x_m, x_d, step=0):
        """One control period. Returns the integrated configuration."""

        state = self.state(q, x_m)
        qdot, self.engaged = control_joint_velocities(
            self.model, state, x_d, self.params, self.scene, step
        )
        self.last_position = dq.translation(x_m)
        q_new, self.limit_hit = integrate(state.q, qdot, self.params.dt, self.model)
        return q_new

    def reset(self):
        self.last_position = None


def solve_ik(model, x_goal, q_seed=None, iterations=None, dt=None, tol=None, lambda_e=None):
    """Joint configuration reaching ``x_goal``, found by running the controller to rest."""

    iterations = settings.IK_ITERATIONS if iterations is None else iterations
    tol = settings.IK_TOLERANCE if tol is None else tol
    params = ControllerParams(
        lambda_e=settings.LAMBDA_E if lambda_e is None else lambda_e,
        dt=settings.IK_DT if dt is None else dt,
        qdot_max=None,
        nullspace_gain=0.0,
    )
    q = model.mid_range if q_seed is None else np.asarray(q_seed, dtype=float)

    error = np.inf
    for _ in range(iterations):
        x_m, jac = kinematics.pose_and_jacobian(model, q)
        x_d = _relative(x_m, x_goal)
        e = spatial_error(x_m, x_d)
        error = float(np.linalg.norm(e))
        if error < tol:
            return q
        n_matrix = extended_jacobian(x_d, jac)
        qdot = -params.lambda_e * damped_pinv(n_matrix, params.damping) @ e
        q, _ = integrate(q, qdot, params.dt, model)

    logger.warning(f"{model.name}: pose not reached, error {error:.3g}")
    raise NonConvergenceError(f"{model.name} cannot reach the requested pose (error {error:.3g})")
