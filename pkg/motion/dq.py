"""Quaternion and unit dual quaternion algebra.

Quaternions are numpy arrays in (w, x, y, z) order. A dual quaternion is
stored as one 8-vector (pw, px, py, pz, dw, dx, dy, dz), which is also its
``vec`` representation. Tangent vectors (results of ``log``) use half-angle
screw coordinates: ``log(x) = ½(θ l + ε(d l + θ m))`` for the screw with
axis ``l``, moment ``m``, angle ``θ`` and translation ``d``.
"""

from dataclasses import dataclass

import numpy as np

from . import settings
from .exceptions import InvalidPoseError

QUAT_IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])

C8 = np.diag([1.0, -1.0, -1.0, -1.0, 1.0, -1.0, -1.0, -1.0])
C8.flags.writeable = False


def qmul(a, b):
    """Hamilton product of two quaternions."""

    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def qconj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def pure(p):
    """Embed a 3-vector as a pure quaternion."""

    return np.array([0.0, p[0], p[1], p[2]])


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return np.concatenate([[np.cos(angle / 2)], np.sin(angle / 2) * axis])


def quat_slerp(q1, q2, t):
    """Spherical linear interpolation along the shorter arc."""

    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    dot = float(np.dot(q1, q2))
    if dot < 0.0:
        q2 = -q2
        dot = -dot
    if dot > 1.0 - 1e-12:
        q = q1 + t * (q2 - q1)
        return q / np.linalg.norm(q)
    omega = np.arccos(np.clip(dot, -1.0, 1.0))
    return (np.sin((1 - t) * omega) * q1 + np.sin(t * omega) * q2) / np.sin(omega)


def skew(v):
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


class DualQuaternion:
    """An immutable dual quaternion ``primary + ε dual``."""

    __slots__ = ("_vec",)

    def __init__(self, primary, dual=None):
        if dual is None:
            values = np.array(primary, dtype=float).reshape(-1)
            if values.shape != (8,):
                raise ValueError(f"Expected 8 coefficients, got {values.shape}")
        else:
            values = np.concatenate(
                [np.asarray(primary, dtype=float), np.asarray(dual, dtype=float)]
            )
        values.flags.writeable = False
        object.__setattr__(self, "_vec", values)

    def __setattr__(self, name, value):
        raise AttributeError("Dual quaternions are immutable")

    @classmethod
    def _wrap(cls, values):
        obj = object.__new__(cls)
        values.flags.writeable = False
        object.__setattr__(obj, "_vec", values)
        return obj

    @property
    def primary(self):
        return self._vec[:4]

    @property
    def dual(self):
        return self._vec[4:]

    def vec(self):
        return self._vec.copy()

    def conj(self):
        return type(self)._wrap(C8 @ self._vec)

    def __mul__(self, other):
        if isinstance(other, DualQuaternion):
            p = qmul(self.primary, other.primary)
            d = qmul(self.primary, other.dual) + qmul(self.dual, other.primary)
            cls = (
                UnitDualQuaternion
                if isinstance(self, UnitDualQuaternion)
                and isinstance(other, UnitDualQuaternion)
                else DualQuaternion
            )
            return cls._wrap(np.concatenate([p, d]))
        return DualQuaternion._wrap(self._vec * float(other))

    def __rmul__(self, scalar):
        return DualQuaternion._wrap(self._vec * float(scalar))

    def __add__(self, other):
        return DualQuaternion._wrap(self._vec + other._vec)

    def __sub__(self, other):
        return DualQuaternion._wrap(self._vec - other._vec)

    def __neg__(self):
        return type(self)._wrap(-self._vec)

    def is_pure(self, tol=1e-12):
        return abs(self._vec[0]) <= tol and abs(self._vec[4]) <= tol

    def __repr__(self):
        p = ", ".join(f"{v:.4g}" for v in self.primary)
        d = ", ".join(f"{v:.4g}" for v in self.dual)
        return f"<{type(self).__name__}: [{p}] + ε[{d}]>"


class UnitDualQuaternion(DualQuaternion):
    """A rigid-body pose. Construction checks the unit-norm conditions."""

    __slots__ = ()

    def __init__(self, primary, dual=None, tol=None):
        super().__init__(primary, dual)
        tol = settings.UNIT_TOLERANCE if tol is None else tol
        norm_defect = abs(np.linalg.norm(self.primary) - 1.0)
        orth_defect = abs(float(np.dot(self.primary, self.dual)))
        if norm_defect > tol or orth_defect > tol:
            raise InvalidPoseError(
                f"Not a unit dual quaternion (norm defect {norm_defect:.3g}, "
                f"orthogonality defect {orth_defect:.3g})"
            )

    def rotation(self):
        return self.primary.copy()

    def translation(self):
        return translation(self)


IDENTITY = UnitDualQuaternion(QUAT_IDENTITY, np.zeros(4))


def from_rotation_translation(r, p, tol=None):
    """x = r + ½ ε p r"""

    r = np.asarray(r, dtype=float)
    tol = settings.UNIT_TOLERANCE if tol is None else tol
    if r.shape != (4,) or abs(np.linalg.norm(r) - 1.0) > tol:
        raise InvalidPoseError(f"Rotation quaternion is not unit: {r}")
    return UnitDualQuaternion._wrap(np.concatenate([r, 0.5 * qmul(pure(p), r)]))


def from_translation(p):
    return from_rotation_translation(QUAT_IDENTITY, p)


def translation(x):
    """p = 2 · dual · primary*"""

    return 2.0 * qmul(x.dual, qconj(x.primary))[1:]


def rotation(x):
    return x.primary.copy()


def normalize(x):
    """Project a nearly-unit dual quaternion back onto the unit manifold."""

    vec = x.vec() if isinstance(x, DualQuaternion) else np.asarray(x, dtype=float)
    norm = np.linalg.norm(vec[:4])
    r = vec[:4] / norm
    d = vec[4:] / norm
    d = d - np.dot(r, d) * r
    return UnitDualQuaternion._wrap(np.concatenate([r, d]))


def shortest(x):
    """Representative of the pose with a non-negative primary scalar."""

    return -x if x.primary[0] < 0.0 else x


def align(x, reference):
    """Flip ``x`` onto the same hemisphere as ``reference`` in vec space."""

    return -x if np.dot(x._vec, reference._vec) < 0.0 else x


def same_pose(a, b, tol=None):
    tol = settings.UNIT_TOLERANCE if tol is None else tol
    return np.linalg.norm(align(b, a)._vec - a._vec) <= tol


def transform_point(x, point):
    r = x.primary
    rotated = qmul(qmul(r, pure(point)), qconj(r))[1:]
    return rotated + translation(x)


# Series-safe coefficient functions, evaluated at rotation angle theta. The
# cancelling ratios switch to their series well before SMALL_ANGLE; the
# truncation error there is below 1e-16.
SERIES_ANGLE = 1e-2


def _half_sinc(theta):
    """sin(θ/2)/θ"""

    if theta < settings.SMALL_ANGLE:
        t2 = theta * theta
        return 0.5 - t2 / 48.0 + t2 * t2 / 3840.0
    return np.sin(theta / 2) / theta


def _v_coefficients(theta):
    """(1-cosθ)/θ², (θ-sinθ)/θ³"""

    if theta < SERIES_ANGLE:
        t2 = theta * theta
        return (
            0.5 - t2 / 24.0 + t2 * t2 / 720.0,
            1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0,
        )
    return (1 - np.cos(theta)) / theta**2, (theta - np.sin(theta)) / theta**3


def _v_inverse_coefficient(theta):
    """(1 - (θ/2)cot(θ/2)) / θ²"""

    if theta < SERIES_ANGLE:
        t2 = theta * theta
        return 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    half = theta / 2
    return (1.0 - half * np.cos(half) / np.sin(half)) / theta**2


def _phi_over_sin(phi, s):
    """φ / sin φ, with the series below SMALL_ANGLE"""

    if phi < settings.SMALL_ANGLE:
        p2 = phi * phi
        return 1.0 + p2 / 6.0 + 7.0 * p2 * p2 / 360.0
    return phi / s


def log(x):
    """Logarithm at the identity, in half-angle screw coordinates.

    The pose is sign-normalized first so the shorter screw is returned.
    """

    x = shortest(x)
    w = float(x.primary[0])
    v = x.primary[1:]
    s = float(np.linalg.norm(v))
    phi = float(np.arctan2(s, w))

    omega = 2.0 * _phi_over_sin(phi, s) * v
    theta = 2.0 * phi
    p = translation(x)
    om = skew(omega)
    nu = p - 0.5 * om @ p + _v_inverse_coefficient(theta) * (om @ (om @ p))

    return DualQuaternion._wrap(np.concatenate([[0.0], 0.5 * omega, [0.0], 0.5 * nu]))


def exp(y):
    """Exponential at the identity of a pure dual quaternion."""

    omega = 2.0 * np.asarray(y.primary[1:])
    nu = 2.0 * np.asarray(y.dual[1:])
    theta = float(np.linalg.norm(omega))

    r = np.concatenate([[np.cos(theta / 2)], _half_sinc(theta) * omega])
    a, b = _v_coefficients(theta)
    om = skew(omega)
    p = nu + a * (om @ nu) + b * (om @ (om @ nu))

    return UnitDualQuaternion._wrap(np.concatenate([r, 0.5 * qmul(pure(p), r)]))


def exp_at(x, y):
    """Parallel-transported exponential x·exp(x*·y)."""

    return x * exp(x.conj() * y)


def log_at(x, z):
    """Parallel-transported logarithm x·log(x*·z)."""

    return x * log(x.conj() * z)


def pow(x, tau):
    return exp(float(tau) * log(x))


def sclerp(x1, x2, tau):
    """x1 · (x1* · x2)^τ along the shorter screw."""

    return x1 * pow(x1.conj() * x2, tau)


@dataclass(frozen=True)
class ScrewParameters:
    axis: np.ndarray
    moment: np.ndarray
    angle: float
    translation: float


def screw(x):
    """Screw parameters of a pose.

    A pure translation has its axis along the translation and zero moment.
    The identity returns a zero axis.
    """

    y = log(x)
    omega = 2.0 * y.primary[1:]
    nu = 2.0 * y.dual[1:]
    theta = float(np.linalg.norm(omega))

    if theta < settings.SMALL_ANGLE:
        d = float(np.linalg.norm(nu))
        axis = nu / d if d > 0.0 else np.zeros(3)
        return ScrewParameters(axis, np.zeros(3), theta, d)

    axis = omega / theta
    d = float(np.dot(axis, nu))
    moment = (nu - d * axis) / theta
    return ScrewParameters(axis, moment, theta, d)


def from_screw(axis, moment, angle, d):
    axis = np.asarray(axis, dtype=float)
    moment = np.asarray(moment, dtype=float)
    primary = 0.5 * angle * axis
    dual = 0.5 * (d * axis + angle * moment)
    return exp(DualQuaternion(pure(primary), pure(dual)))


def quat_hamilton_plus(q):
    w, x, y, z = q
    return np.array(
        [
            [w, -x, -y, -z],
            [x, w, -z, y],
            [y, z, w, -x],
            [z, -y, x, w],
        ]
    )


def quat_hamilton_minus(q):
    w, x, y, z = q
    return np.array(
        [
            [w, -x, -y, -z],
            [x, w, z, -y],
            [y, -z, w, x],
            [z, y, -x, w],
        ]
    )


def hamilton_plus(x):
    """H+(x) such that vec(x·a) = H+(x) vec(a)."""

    p = quat_hamilton_plus(x.primary)
    d = quat_hamilton_plus(x.dual)
    return np.block([[p, np.zeros((4, 4))], [d, p]])


def hamilton_minus(x):
    """H−(x) such that vec(a·x) = H−(x) vec(a)."""

    p = quat_hamilton_minus(x.primary)
    d = quat_hamilton_minus(x.dual)
    return np.block([[p, np.zeros((4, 4))], [d, p]])


def c8():
    return C8.copy()


def vec(x):
    return x.vec()


def from_vec(values):
    return DualQuaternion(values)


def pose_from_values(values, tol=None):
    """Parse a pose from 8 dual quaternion coefficients or (tx, ty, tz, qw, qx, qy, qz)."""

    try:
        values = np.asarray([float(v) for v in values])
    except (TypeError, ValueError) as e:
        raise InvalidPoseError(f"Pose values must be numbers: {e}") from e
    tol = settings.POSE_INPUT_TOLERANCE if tol is None else tol

    if values.size == 8:
        r = values[:4]
        norm = np.linalg.norm(r)
        if abs(norm - 1.0) > tol:
            raise InvalidPoseError(f"Primary part is not unit: {r}")
        return normalize(values)

    if values.size == 7:
        r = values[3:]
        norm = np.linalg.norm(r)
        if abs(norm - 1.0) > tol:
            raise InvalidPoseError(f"Rotation quaternion is not unit: {r}")
        return from_rotation_translation(r / norm, values[:3])

    raise InvalidPoseError(f"Expected 7 or 8 scalars for a pose, got {values.size}")
