import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import dq, repet, tsia
from ..config import ExperimentConfig, get_settings
from ..controller import DQController, solve_ik
from ..exceptions import (
    EXIT_SUCCESS,
    AvoidanceFailure,
    ConfigError,
    MotionError,
    NonConvergenceError,
    StopRun,
)
from ..formats import load_demo, load_joint_trajectory, save_demo
from ..items import TrajectoryStep
from ..kinematics import forward_kinematics, load_robot
from ..pipelines import StepPipelineManager

logger = logging.getLogger(__name__)

SUCCESS = "success"
NON_CONVERGENCE = "non_convergence"
AVOIDANCE_FAILURE = "avoidance_failure"
TIME_LIMIT = "time_limit"
ERROR = "error"

# detour poses are tracked until this close, in units of the detour spacing
DETOUR_TRACKING = 1.0
DETOUR_MAX_PERIODS = 50


class RunLoggerAdapter(logging.LoggerAdapter):
    def process(self, msg, kwargs):
        return f"[{self.extra['run']}] {msg}", kwargs


@dataclass
class RunResult:
    status: str
    exit_code: int
    paths: list = field(default_factory=list)
    q: np.ndarray = None
    summary: dict = None


class Experiment:
    """One closed-loop run: planner, escape trees, controller and robot."""

    name = "experiment"

    def __init__(self, config, settings, model=None, demo=None):
        self.config = config
        self.settings = settings
        if demo is None and not config.demo:
            raise ConfigError("No demonstration given")
        self.model = model or load_robot(config.robot)
        self.demo = demo if demo is not None else load_demo(config.demo)
        self.scene = repet.load_scene(config.scene, settings.getfloat("SHELL_FACTOR"))

        self.output_dir = config.output_dir
        self.seed = config.seed
        self.config_hash = config.config_hash
        self.rng = np.random.default_rng(config.seed)
        self.logger = RunLoggerAdapter(
            logging.getLogger(f"motion.{self.name}"),
            {"run": os.path.basename(os.path.normpath(self.output_dir))},
        )

        self.controller = DQController(self.model, config.controller, self.scene)
        self.metrics = {}
        self.planner_timings = []
        self.level_timings = []
        self.status = None
        self.exit_code = None
        self.summary = None
        self.step_index = 0
        self.goal = config.goal

        self.pipelines = StepPipelineManager.from_settings(settings, self)

    def check_time_limit(self):
        """Stops the run once it exceeds its wall-clock limit."""

        limit = self.config.time_limit
        if limit and time.monotonic() - self.start_time > limit:
            raise StopRun(f"Stopped due to time limit ({limit} s)")

    # Plant

    def measure(self, q):
        """Pose of the end-effector, with Gaussian noise when configured."""

        x = forward_kinematics(self.model, q)
        if not self.config.noise:
            return x
        twist = self.rng.normal(0.0, self.config.noise, size=6)
        noise = dq.exp(dq.DualQuaternion(dq.pure(0.5 * twist[:3]), dq.pure(0.5 * twist[3:])))
        return x * noise

    def initial_configuration(self):
        if self.config.start_config is not None:
            return np.asarray(self.config.start_config, dtype=float)
        self.logger.info("Solving the start configuration from the start pose")
        return solve_ik(self.model, self.config.start_pose, self.config.start_seed)

    def record(self, x_d, active):
        position = dq.translation(self.x_m)
        clearance = self.scene.min_clearance(position, self.step_index)

        item = TrajectoryStep(
            step=self.step_index,
            time=self.step_index * self.config.controller.dt,
            q=self.q.copy(),
            x_m=self.x_m.vec(),
            x_d=x_d.vec(),
            goal_error=tsia.goal_error(self.x_m, self.goal),
            min_clearance=None if clearance is None else float(clearance),
            avoidance_active=bool(active),
        )
        self.pipelines.process_item(item)
        self.step_index += 1

    def track(self, target, active=False, tolerance=None):
        """Run the controller towards ``target`` and return the pose reached.

        Without ``tolerance`` this is CONTROL_SUBSTEPS periods; with it the
        controller keeps going until the position error is below it.
        """

        periods = self.config.substeps
        limit = periods if tolerance is None else periods * DETOUR_MAX_PERIODS
        goal_position = dq.translation(target)

        for period in range(limit):
            self.check_time_limit()
            self.q = self.controller.step(self.q, self.x_m, target, self.step_index)
            self.x_m = self.measure(self.q)
            self.record(target, active or self.controller.engaged)

            if tolerance is not None and period + 1 >= periods:
                if np.linalg.norm(dq.translation(self.x_m) - goal_position) < tolerance:
                    break
        return self.x_m

    # Planner step

    def _blocking_obstacle(self, position, guide, step):
        found = repet.closest_obstacle(self.scene, position, step)
        if found is None:
            return None
        obstacle, _ = found
        if not repet.inside_detection_shell(position, obstacle):
            return None
        if not repet.segment_collides(
            position,
            dq.translation(guide),
            self.scene,
            step,
            self.config.repet.margin,
        ):
            return None
        return obstacle

    def _reconnection_index(self, ip, start, point):
        for index in range(start, len(ip)):
            if np.array_equal(dq.translation(ip[index]), point):
                return index
        return len(ip) - 1

    def detour(self, obstacle, plan_step):
        """Escape around ``obstacle`` and return the poses reached on the way."""

        ip = plan_step.imitated
        start = plan_step.guide_index
        waypoints = repet.escape_tree(
            self.x_m,
            dq.translation(plan_step.goal),
            obstacle,
            self.scene,
            self.config.repet,
            reconnect_points=[dq.translation(p) for p in ip[start:]],
            step=self.step_index,
            on_level=self.level_timings.append,
        )
        index = self._reconnection_index(ip, start, waypoints[-1])

        points = np.asarray(waypoints)
        length = float(np.sum(np.linalg.norm(np.diff(points, axis=0), axis=1)))
        count = max(len(waypoints), math.ceil(length / self.config.detour_step)) + 1

        origin = self.x_m
        segment = tsia.PosePath(
            [tsia.target_pose(origin, ip[index], k / (count - 1)) for k in range(count)],
            tsia.FINAL,
        )
        shifted = repet.shift_final_path(segment, waypoints)
        self.logger.debug(
            f"Detour of {len(waypoints)} waypoints ({length:.3f} m), reconnecting at {index}"
        )

        reached = [
            self.track(pose, active=True, tolerance=DETOUR_TRACKING * self.config.detour_step)
            for pose in shifted[1:]
        ]
        return reached, index

    def execute(self, target, plan_step):
        """Step executor handed to the planner."""

        started = time.perf_counter()
        self.goal = plan_step.goal

        reached = self.track(target)
        result = reached

        if len(self.scene):
            position = dq.translation(reached)
            obstacle = self._blocking_obstacle(position, plan_step.guide, self.step_index)
            if obstacle is not None:
                self.logger.debug(
                    f"Iteration {plan_step.iteration}: inside the shell of the obstacle at "
                    f"{obstacle.center}"
                )
                poses, index = self.detour(obstacle, plan_step)
                result = tsia.Execution([reached, *poses], guide_index=index)

        self.planner_timings.append(time.perf_counter() - started)
        return result

    # Run

    def run(self):
        os.makedirs(self.output_dir, exist_ok=True)
        self.start_time = time.monotonic()
        self.pipelines.open_run()

        paths = []
        try:
            self.q = self.initial_configuration()
            self.x_m = self.measure(self.q)
            self.record(self.x_m, False)

            goals = [self.config.goal, *self.config.goals]
            paths = tsia.plan_sequence(
                self.demo, self.x_m, goals, self.config.planner, self.execute
            )
            self.status, self.exit_code = SUCCESS, EXIT_SUCCESS
            self.logger.info(
                f"Reached the goal in {self.step_index} controller steps "
                f"(error {tsia.goal_error(self.x_m, self.goal):.3g})"
            )
        except NonConvergenceError as e:
            self.status, self.exit_code = NON_CONVERGENCE, e.code
            if e.path is not None:
                paths.append(e.path)
            self.logger.warning(f"Run did not converge: {e}")
        except AvoidanceFailure as e:
            self.status, self.exit_code = AVOIDANCE_FAILURE, e.code
            self.logger.warning(f"Run aborted: {e}")
        except StopRun as e:
            self.status, self.exit_code = TIME_LIMIT, e.code
            self.logger.warning(str(e))
        except MotionError as e:
            self.status, self.exit_code = ERROR, e.code
            raise
        finally:
            self.pipelines.close_run()

        return RunResult(self.status, self.exit_code, paths, getattr(self, "q", None), self.summary)


def run_experiment(config, settings, model=None, demo=None):
    return Experiment(config, settings, model, demo).run()


def record_demo(model, joint_trajectory_file, output_file=None):
    """Demonstration from a joint trajectory, through forward kinematics."""

    q = load_joint_trajectory(joint_trajectory_file, model.dof)
    poses = [forward_kinematics(model, row) for row in q]
    demo = tsia.PosePath(poses, tsia.DEMONSTRATED, min_length=1).collapsed(min_length=1)
    logger.info(f"Recorded {len(demo)} demonstration poses on {model.name}")
    if output_file:
        save_demo(output_file, demo)
    return demo


def retarget_demo(demo, model_a, model_b, goal, settings=None, start_config=None):
    """Plan and execute on ``model_b`` a demonstration recorded on ``model_a``.

    ``demo`` is a pose path or a joint trajectory of ``model_a``. Without a
    start configuration, ``model_b`` starts at the first demonstrated pose.
    """

    if not isinstance(demo, tsia.PosePath):
        demo = tsia.PosePath(
            [forward_kinematics(model_a, q) for q in np.atleast_2d(demo)], tsia.DEMONSTRATED
        )

    settings = settings or get_settings()
    config = ExperimentConfig.from_settings(
        settings,
        robot=model_b.name,
        demo=None,
        goal=goal,
        start_config=start_config,
        start_pose=None if start_config is not None else demo[0],
    )
    return run_experiment(config, settings, model=model_b, demo=demo)


def run_batch(config_paths, overrides=None, workers=None):
    """Run independent experiments in worker threads.

    Each one gets its own settings and, when an output directory is
    overridden, its own subdirectory named after the experiment file.
    """

    overrides = overrides or {}

    def run_one(path):
        local = dict(overrides)
        if local.get("OUTPUT_DIR"):
            name = os.path.splitext(os.path.basename(path))[0]
            local["OUTPUT_DIR"] = os.path.join(local["OUTPUT_DIR"], name)
        try:
            settings = get_settings(path, local)
            result = run_experiment(ExperimentConfig.from_settings(settings), settings)
            return path, result.exit_code
        except MotionError as e:
            logger.error(f"{path}: {e}")
            return path, e.code

    workers = workers or get_settings().getint("BATCH_WORKERS")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_one, config_paths))
