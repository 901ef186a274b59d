"""Task space imitation: replay one demonstration towards a new goal.

The demonstrated path (DP) is turned into relative transforms to its last
pose, replayed backwards from the new goal into the imitated path (IP), and
the final path (FP) blends from the new start into the IP with screw linear
interpolation before following it.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import dq, settings
from .exceptions import ConfigError, ModelError, NonConvergenceError

logger = logging.getLogger(__name__)

DEMONSTRATED = "demonstrated"
IMITATED = "imitated"
FINAL = "final"


class PosePath:
    """An ordered sequence of unit dual quaternion poses."""

    def __init__(self, poses, kind=DEMONSTRATED, min_length=2):
        poses = list(poses)
        if len(poses) < min_length:
            raise ModelError(
                f"A {kind} path needs at least {min_length} poses, got {len(poses)}"
            )
        for pose in poses:
            if not isinstance(pose, dq.UnitDualQuaternion):
                raise ModelError(f"Not a unit dual quaternion pose: {pose!r}")
        self.poses = poses
        self.kind = kind

    def __len__(self):
        return len(self.poses)

    def __getitem__(self, index):
        return self.poses[index]

    def __iter__(self):
        return iter(self.poses)

    def translations(self):
        return np.array([dq.translation(x) for x in self.poses])

    def as_array(self):
        return np.array([x.vec() for x in self.poses])

    def collapsed(self, tol=None, min_length=2):
        """Copy without consecutive duplicate poses (dwell segments)."""

        tol = settings.DUPLICATE_TOLERANCE if tol is None else tol
        kept = [self.poses[0]]
        for pose in self.poses[1:]:
            if goal_error(kept[-1], pose) >= tol:
                kept.append(pose)
        if len(kept) != len(self.poses):
            logger.debug(f"Collapsed {len(self.poses) - len(kept)} duplicate poses")
        return PosePath(kept, self.kind, min_length=min_length)


@dataclass
class PlannerParams:
    tau_step: float = settings.TAU_STEP
    goal_tolerance: float = settings.GOAL_TOLERANCE
    guiding_fraction: float = settings.GUIDING_FRACTION
    max_iterations: int = None

    def __post_init__(self):
        if not 0.0 < self.tau_step <= 1.0:
            raise ConfigError(f"tau_step must lie in (0, 1], got {self.tau_step}")
        if not 0.0 <= self.guiding_fraction <= 1.0:
            raise ConfigError(
                f"guiding_fraction must lie in [0, 1], got {self.guiding_fraction}"
            )
        if self.goal_tolerance <= 0.0:
            raise ConfigError("goal_tolerance must be positive")

    @classmethod
    def from_settings(cls, settings):
        max_iterations = settings.get("MAX_ITERATIONS")
        return cls(
            tau_step=settings.getfloat("TAU_STEP"),
            goal_tolerance=settings.getfloat("GOAL_TOLERANCE"),
            guiding_fraction=settings.getfloat("GUIDING_FRACTION"),
            max_iterations=int(max_iterations) if max_iterations else None,
        )

    def iteration_budget(self, n):
        if self.max_iterations:
            return self.max_iterations
        return int(math.ceil(10 * n / self.tau_step))


def relative_transforms(dp):
    """δ_i = d*_{i-1} · d_n for i = 2..n."""

    if len(dp) < 2:
        raise ModelError("Demonstration is too short to extract relative transforms")
    last = dp[-1]
    return [dp[i - 1].conj() * last for i in range(1, len(dp))]


def imitated_path(deltas, new_goal):
    """d'_{i-1} = d'_n · δ_i*, ending exactly at the new goal."""

    poses = [new_goal * delta.conj() for delta in deltas]
    poses.append(new_goal)
    return PosePath(poses, IMITATED)


def target_pose(d_c, d_guid, tau):
    return dq.sclerp(d_c, d_guid, tau)


def select_guiding_pose(ip, current_index, params):
    """Return the next guiding pose and its index on the imitated path.

    The first call (``current_index`` is None) jumps ``guiding_fraction`` of
    the way along the path; later calls advance by one until the goal.
    """

    last = len(ip) - 1
    if current_index is None:
        # guard against 0.2 * 10 landing a hair above 2
        index = math.ceil(params.guiding_fraction * len(ip) - 1e-9)
        index = min(max(index, 1), last)
    else:
        index = min(current_index + 1, last)
    return ip[index], index


def goal_error(d_c, d_goal):
    """‖vec(d_c) − vec(d_goal)‖ with d_goal taken on d_c's hemisphere."""

    d_goal = dq.align(d_goal, d_c)
    return float(np.linalg.norm(d_c.vec() - d_goal.vec()))


@dataclass
class PlanStep:
    """What an executor knows about the planner iteration it serves."""

    iteration: int
    current: dq.UnitDualQuaternion
    guide: dq.UnitDualQuaternion
    guide_index: int
    imitated: PosePath
    goal: dq.UnitDualQuaternion


@dataclass
class Execution:
    """Poses reached while executing one target, in order.

    An executor that jumps ahead on the imitated path (after an obstacle
    detour) reports the index it reconnected at.
    """

    poses: list = field(default_factory=list)
    guide_index: int = None


def open_loop(target, step):
    return target


def plan(dp, start, goal, params=None, step_executor=None):
    """Plan the final path from ``start`` to ``goal`` imitating ``dp``.

    ``step_executor(target, step)`` returns the pose actually reached (or an
    ``Execution``); the default reaches every target exactly.
    """

    params = params or PlannerParams()
    step_executor = step_executor or open_loop

    dp = dp.collapsed()
    ip = imitated_path(relative_transforms(dp), goal)
    budget = params.iteration_budget(len(ip))

    fp = [start]
    d_c = start
    guide_index = None
    error = goal_error(d_c, goal)
    iteration = 0

    while error > params.goal_tolerance:
        if iteration >= budget:
            logger.warning(
                f"Planner did not converge after {iteration} iterations (error {error:.3g})"
            )
            raise NonConvergenceError(
                f"No convergence within {budget} iterations",
                path=PosePath(fp, FINAL, min_length=1),
                error=error,
            )

        guide, guide_index = select_guiding_pose(ip, guide_index, params)
        d_t = target_pose(d_c, guide, params.tau_step)

        step = PlanStep(iteration, d_c, guide, guide_index, ip, goal)
        reached = step_executor(d_t, step)

        if isinstance(reached, Execution):
            if reached.guide_index is not None:
                guide_index = max(guide_index, reached.guide_index)
            fp.extend(reached.poses)
            if reached.poses:
                d_c = reached.poses[-1]
        else:
            fp.append(reached)
            d_c = reached

        error = goal_error(d_c, goal)
        iteration += 1

    if len(fp) == 1:
        # already at the goal
        fp.append(goal)

    logger.debug(f"Planner converged in {iteration} iterations (error {error:.3g})")
    return PosePath(fp, FINAL)


def plan_sequence(dp, start, goals, params=None, step_executor=None):
    """Chain several goals with the same demonstration, each plan starting
    where the previous one ended."""

    paths = []
    current = start
    for goal in goals:
        path = plan(dp, current, goal, params, step_executor)
        paths.append(path)
        current = path[-1]
    return paths
