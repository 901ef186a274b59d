"""Rapidly expanding plane-oriented escaping trees.

When the end-effector enters the detection shell of a spherical obstacle,
tangent planes are grown around the obstacle, level by level, until a leaf
has a free straight segment back to the final path beyond the shell. The
resulting waypoints shift the translations of upcoming final path poses.
"""

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import dq, settings
from .exceptions import AvoidanceFailure, DegenerateGeometryError, ModelError
from .tsia import PosePath

logger = logging.getLogger(__name__)

I_HAT = np.array([1.0, 0.0, 0.0])
J_HAT = np.array([0.0, 1.0, 0.0])

# a segment starting at the root must not come closer than the root itself
CLEARANCE_SLACK = 1e-9

GOAL_DISTANCE = "goal_distance"
PATH_LENGTH = "path_length"


@dataclass(frozen=True, eq=False)
class SphereObstacle:
    center: np.ndarray
    radius: float
    shell_radius: float = None
    activation_step: int = 0

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        object.__setattr__(self, "center", center)
        if self.shell_radius is None:
            object.__setattr__(self, "shell_radius", settings.SHELL_FACTOR * self.radius)
        if not self.shell_radius > self.radius > 0.0:
            raise ModelError(
                f"Obstacle at {center} needs shell_radius > radius > 0 "
                f"(got {self.shell_radius}, {self.radius})"
            )

    def distance(self, position):
        """Signed distance from the obstacle surface."""

        return float(np.linalg.norm(np.asarray(position) - self.center)) - self.radius


@dataclass(frozen=True, eq=False)
class ObstacleScene:
    obstacles: tuple = ()

    def active(self, step=0):
        return [o for o in self.obstacles if o.activation_step <= step]

    def __len__(self):
        return len(self.obstacles)

    def min_clearance(self, position, step=0):
        """Smallest surface distance to an active obstacle, None for an empty scene."""

        active = self.active(step)
        if not active:
            return None
        return min(o.distance(position) for o in active)


def load_scene(path, shell_factor=None):
    """Read a YAML scene: a list of obstacles under ``obstacles``.

    Obstacles without a shell radius get ``shell_factor`` times their radius.
    """

    if path is None:
        return ObstacleScene()
    try:
        with open(path, "r") as file:
            data = yaml.safe_load(file) or {}
    except OSError as e:
        raise ModelError(f"Could not read scene {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ModelError(f"Could not parse scene {path}: {e}") from e

    shell_factor = settings.SHELL_FACTOR if shell_factor is None else shell_factor
    obstacles = []
    try:
        for record in data.get("obstacles", []):
            radius = float(record["radius"])
            shell_radius = record.get("shell_radius")
            obstacles.append(
                SphereObstacle(
                    center=np.asarray(record["center"], dtype=float),
                    radius=radius,
                    shell_radius=(
                        shell_factor * radius if shell_radius is None else float(shell_radius)
                    ),
                    activation_step=int(record.get("activation_step", 0)),
                )
            )
    except (KeyError, TypeError, ValueError) as e:
        raise ModelError(f"Invalid obstacle record in {path}: {e}") from e

    logger.debug(f"Loaded {len(obstacles)} obstacles from {path}")
    return ObstacleScene(tuple(obstacles))


@dataclass
class RepetParams:
    k_eta: float = settings.K_ETA
    max_depth: int = settings.MAX_DEPTH
    max_resamples: int = settings.MAX_RESAMPLES
    growth: float = settings.K_ETA_GROWTH
    cost: str = settings.ESCAPE_COST
    samples: int = settings.ESCAPE_SAMPLES
    margin: float = settings.ESCAPE_MARGIN
    seed: int = settings.SEED

    @classmethod
    def from_settings(cls, settings):
        k_eta = settings.get("K_ETA")
        return cls(
            k_eta=float(k_eta) if k_eta else None,
            max_depth=settings.getint("MAX_DEPTH"),
            max_resamples=settings.getint("MAX_RESAMPLES"),
            growth=settings.getfloat("K_ETA_GROWTH"),
            cost=settings.get("ESCAPE_COST"),
            samples=settings.getint("ESCAPE_SAMPLES"),
            margin=settings.getfloat("ESCAPE_MARGIN"),
            seed=settings.getint("SEED"),
        )


@dataclass(frozen=True, eq=False)
class TangentPlane:
    root: np.ndarray
    normal: np.ndarray
    v: np.ndarray
    u: np.ndarray
    k_eta: float


@dataclass
class TreeNode:
    position: np.ndarray
    parent: int
    depth: int


@dataclass
class EscapeTree:
    k_eta: float
    max_depth: int
    nodes: list = field(default_factory=list)

    def add(self, position, parent=-1):
        depth = 0 if parent < 0 else self.nodes[parent].depth + 1
        self.nodes.append(TreeNode(np.asarray(position, dtype=float), parent, depth))
        return len(self.nodes) - 1

    def branch(self, index):
        """Positions from the root down to node ``index``."""

        positions = []
        while index >= 0:
            node = self.nodes[index]
            positions.append(node.position)
            index = node.parent
        return positions[::-1]


def closest_obstacle(scene, position, step=0):
    """Active obstacle with the nearest surface and the surface point facing ``position``.

    Ties go to the lower-index obstacle.
    """

    position = np.asarray(position, dtype=float)
    best = None
    best_distance = math.inf
    for obstacle in scene.active(step):
        distance = obstacle.distance(position)
        if distance < best_distance:
            best, best_distance = obstacle, distance
    if best is None:
        return None

    offset = position - best.center
    norm = np.linalg.norm(offset)
    direction = offset / norm if norm > 0.0 else I_HAT
    return best, best.center + best.radius * direction


def inside_detection_shell(position, obstacle):
    return float(np.linalg.norm(np.asarray(position) - obstacle.center)) <= obstacle.shell_radius


def normal_vector(position, obstacle):
    offset = np.asarray(position, dtype=float) - obstacle.center
    norm = np.linalg.norm(offset)
    if norm == 0.0:
        raise DegenerateGeometryError("Position is at the obstacle center")
    return offset / norm


def build_plane(root, k_eta, obstacle):
    """Tangent plane at ``root``: v = î × η̂ · k_η/2 and u = η̂ × v."""

    if k_eta <= 0.0:
        raise DegenerateGeometryError(f"Plane diagonal must be positive, got {k_eta}")
    root = np.asarray(root, dtype=float)
    eta = normal_vector(root, obstacle)

    reference = J_HAT if abs(np.dot(eta, I_HAT)) > 0.99 else I_HAT
    v = np.cross(reference, eta)
    v = v / np.linalg.norm(v) * (k_eta / 2.0)
    u = np.cross(eta, v)
    return TangentPlane(root, eta, v, u, k_eta)


def candidate_points(plane):
    """Sides then corners of the plane around its root."""

    r, v, u = plane.root, plane.v, plane.u
    return [
        r + v,
        r - v,
        r + u,
        r - u,
        r + v + u,
        r + v - u,
        r - v + u,
        r - v - u,
    ]


def random_points(plane, count, rng):
    """Random in-plane points, used when a resample widens the plane."""

    a = rng.uniform(-1.0, 1.0, size=(count, 2))
    return [plane.root + ai * plane.v + bi * plane.u for ai, bi in a]


def _segment_distance(p0, p1, point):
    d = p1 - p0
    length2 = float(np.dot(d, d))
    if length2 == 0.0:
        return float(np.linalg.norm(point - p0))
    t = min(max(float(np.dot(point - p0, d)) / length2, 0.0), 1.0)
    return float(np.linalg.norm(p0 + t * d - point))


def segment_collides(p0, p1, scene, step=0, margin=0.0):
    """True if the segment passes strictly closer than radius (+ margin) to an active obstacle."""

    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    for obstacle in scene.active(step):
        if _segment_distance(p0, p1, obstacle.center) < obstacle.radius + margin:
            return True
    return False


def escape_margin(position, scene, step, margin):
    """Escape margin capped at the clearance already left at ``position``.

    Tree nodes only move outwards from the root, so a root that sits
    closer to the surface than ``margin`` keeps its own clearance instead.
    """

    clearance = scene.min_clearance(position, step)
    if clearance is None:
        return margin
    return min(margin, max(clearance - CLEARANCE_SLACK, 0.0))


def _path_cost(branch, end, goal_position, cost):
    if cost == PATH_LENGTH:
        points = branch + [end]
        return sum(
            float(np.linalg.norm(b - a)) for a, b in zip(points[:-1], points[1:])
        ) + float(np.linalg.norm(end - goal_position))
    return float(np.linalg.norm(branch[-1] - goal_position))


def _reconnection(position, obstacle, reconnect_points, goal_position, scene, step, margin):
    """First reconnection point with a free segment from ``position``, or None."""

    if inside_detection_shell(goal_position, obstacle):
        candidates = [goal_position]
    else:
        candidates = [p for p in reconnect_points if not inside_detection_shell(p, obstacle)]

    for point in candidates:
        if not segment_collides(position, point, scene, step, margin):
            return point
    return None


def escape_tree(
    x_c,
    goal_position,
    obstacle,
    scene,
    params=None,
    reconnect_points=None,
    step=0,
    on_level=None,
):
    """Grow escape trees from the current pose and return the selected waypoints.

    The first waypoint is the current position and the last one the
    reconnection point on the final path. ``on_level(seconds)`` is called
    after every expanded tree level.
    """

    params = params or RepetParams()
    goal_position = np.asarray(goal_position, dtype=float)
    reconnect_points = [np.asarray(p, dtype=float) for p in (reconnect_points or [])]
    reconnect_points.append(goal_position)

    if obstacle.distance(goal_position) < 0.0:
        raise AvoidanceFailure("The goal lies inside the obstacle")

    rng = np.random.default_rng(params.seed)
    start = dq.translation(x_c)
    margin = escape_margin(start, scene, step, params.margin)
    k_eta = params.k_eta or obstacle.shell_radius

    for attempt in range(params.max_resamples + 1):
        tree = EscapeTree(k_eta, params.max_depth)
        root = tree.add(start)

        for depth in range(params.max_depth + 1):
            started = time.perf_counter()

            # Leaves with a free segment back to the path
            leaves = [root] if depth == 0 else level
            found = []
            for index in leaves:
                branch = tree.branch(index)
                point = _reconnection(
                    branch[-1],
                    obstacle,
                    reconnect_points,
                    goal_position,
                    scene,
                    step,
                    margin,
                )
                if point is not None:
                    found.append((_path_cost(branch, point, goal_position, params.cost), index, point))

            if found:
                _, index, point = min(found, key=lambda f: f[0])
                waypoints = tree.branch(index) + [point]
                if on_level:
                    on_level(time.perf_counter() - started)
                logger.debug(
                    f"Escape found at depth {depth} (attempt {attempt}, k_eta {k_eta:.3g})"
                )
                return waypoints

            if depth == params.max_depth:
                break

            # Set root: the best free child of this level is expanded next
            parent = root if depth == 0 else best
            plane = build_plane(tree.nodes[parent].position, k_eta, obstacle)
            children = candidate_points(plane)
            if attempt > 0:
                children += random_points(plane, params.samples, rng)

            level = []
            for child in children:
                if obstacle.distance(child) < margin:
                    continue
                if segment_collides(tree.nodes[parent].position, child, scene, step, margin):
                    continue
                level.append(tree.add(child, parent))

            if on_level:
                on_level(time.perf_counter() - started)

            if not level:
                break
            best = min(
                level,
                key=lambda i: _path_cost(tree.branch(i), tree.nodes[i].position, goal_position, params.cost),
            )

        k_eta *= params.growth
        logger.debug(f"Escape tree exhausted, resampling with k_eta {k_eta:.3g}")

    raise AvoidanceFailure(
        f"No escape around obstacle at {obstacle.center} after {params.max_resamples} resamples"
    )


def _polyline_point(points, lengths, s):
    """Point at arc length ``s`` along a polyline with cumulative ``lengths``."""

    if s <= 0.0:
        return points[0]
    if s >= lengths[-1]:
        return points[-1]
    i = int(np.searchsorted(lengths, s, side="right")) - 1
    i = min(i, len(points) - 2)
    span = lengths[i + 1] - lengths[i]
    t = 0.0 if span == 0.0 else (s - lengths[i]) / span
    return points[i] + t * (points[i + 1] - points[i])


def shift_final_path(fp_segment, waypoints):
    """Move segment translations onto the waypoint polyline, keeping rotations.

    Poses are matched by arc length: the k-th pose lands at the same fraction
    of the polyline length as it had along the original segment.
    """

    if not waypoints:
        return fp_segment

    points = [np.asarray(p, dtype=float) for p in waypoints]
    lengths = np.concatenate(
        [[0.0], np.cumsum([np.linalg.norm(b - a) for a, b in zip(points[:-1], points[1:])])]
    )

    original = fp_segment.translations()
    steps = np.linalg.norm(np.diff(original, axis=0), axis=1)
    travelled = np.concatenate([[0.0], np.cumsum(steps)])
    if travelled[-1] > 0.0:
        fractions = travelled / travelled[-1]
    else:
        fractions = np.linspace(0.0, 1.0, len(fp_segment))

    shifted = []
    for pose, fraction in zip(fp_segment, fractions):
        position = _polyline_point(points, lengths, fraction * lengths[-1])
        shifted.append(dq.from_rotation_translation(pose.rotation(), position))
    return PosePath(shifted, fp_segment.kind, min_length=1)
