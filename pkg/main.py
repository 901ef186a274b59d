"""
Command line for planning and simulating imitated motions.

    python main.py run --config experiment.yaml [--goal ...] [--out ...]
    python main.py run --batch a.yaml b.yaml --out results
    python main.py record --robot planar3 --joints joints.txt --out demo.txt
    python main.py retarget --config experiment.yaml --source-robot planar3 --joints joints.txt
"""

import argparse
import logging
import sys

from motion import log
from motion.config import ExperimentConfig, get_settings
from motion.exceptions import EXIT_CONFIG_ERROR, EXIT_SUCCESS, ConfigError, MotionError
from motion.formats import load_pose
from motion.kinematics import load_robot
from motion.sim.experiment import (
    record_demo,
    retarget_demo,
    run_batch,
    run_experiment,
)

logger = logging.getLogger("motion")


def _add_run_arguments(parser):
    parser.add_argument("--config", help="Experiment YAML file")
    parser.add_argument("--demo", help="Demonstration file")
    parser.add_argument("--scene", help="Obstacle scene YAML file")
    parser.add_argument("--robot", help="Robot model file or bundled model name")
    parser.add_argument("--goal", help="Goal pose, 7 or 8 comma separated numbers")
    parser.add_argument("--tau", type=float, help="Interpolation step of the planner")
    parser.add_argument("--guiding-fraction", type=float, help="First guiding pose, as a fraction of the path")
    parser.add_argument("--k-eta", type=float, help="Escape plane diagonal (m)")
    parser.add_argument("--seed", type=int, help="Seed of the random generators")
    parser.add_argument("--noise", type=float, help="Standard deviation of measured pose noise")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING...")


def _overrides(args):
    return {
        "DEMO": args.demo,
        "SCENE": args.scene,
        "ROBOT": args.robot,
        "GOAL": args.goal,
        "TAU_STEP": args.tau,
        "GUIDING_FRACTION": args.guiding_fraction,
        "K_ETA": args.k_eta,
        "SEED": args.seed,
        "POSE_NOISE": args.noise,
        "OUTPUT_DIR": args.out,
        "LOG_LEVEL": args.log_level,
    }


class MotionCLI:
    """Imitation planner runs from the command line."""

    def __init__(self, argv=None):
        self.args = self.parser().parse_args(argv)

    @staticmethod
    def parser():
        parser = argparse.ArgumentParser(prog="main.py", description=__doc__.strip().splitlines()[0])
        commands = parser.add_subparsers(dest="command", required=True)

        run = commands.add_parser("run", help="Plan and execute one or more experiments")
        _add_run_arguments(run)
        run.add_argument("--batch", nargs="+", metavar="CONFIG", help="Run several experiment files in parallel")
        run.add_argument("--workers", type=int, help="Worker threads in batch mode")

        record = commands.add_parser("record", help="Demonstration from a joint trajectory")
        record.add_argument("--robot", required=True)
        record.add_argument("--joints", required=True, help="Joint trajectory file")
        record.add_argument("--out", required=True, help="Demonstration file to write")

        retarget = commands.add_parser("retarget", help="Execute on one robot a demonstration recorded on another")
        _add_run_arguments(retarget)
        retarget.add_argument("--source-robot", required=True)
        retarget.add_argument("--joints", required=True, help="Joint trajectory recorded on the source robot")

        return parser

    def run(self):
        args = self.args
        overrides = _overrides(args)

        if args.batch:
            settings = get_settings(overrides=overrides)
            log.configure(settings)
            results = run_batch(args.batch, overrides, args.workers)
            for path, code in results:
                logger.info(f"{path}: exit code {code}")
            return max((code for _, code in results), default=EXIT_SUCCESS)

        settings = get_settings(args.config, overrides)
        log.configure(settings)
        config = ExperimentConfig.from_settings(settings)
        return run_experiment(config, settings).exit_code

    def record(self):
        args = self.args
        log.configure(get_settings())
        record_demo(load_robot(args.robot), args.joints, args.out)
        return EXIT_SUCCESS

    def retarget(self):
        args = self.args
        settings = get_settings(args.config, _overrides(args))
        log.configure(settings)

        source = load_robot(args.source_robot)
        target = load_robot(settings.get("ROBOT"))
        demo = record_demo(source, args.joints)
        if settings.get("GOAL") is None:
            raise ConfigError("No goal pose given")
        goal = load_pose(settings.get("GOAL"))
        return retarget_demo(demo, source, target, goal, settings).exit_code

    def main(self):
        try:
            return getattr(self, self.args.command)()
        except MotionError as e:
            logger.error(str(e))
            return e.code
        except OSError as e:
            logger.error(str(e))
            return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(MotionCLI().main())
