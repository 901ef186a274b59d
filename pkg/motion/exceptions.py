"""Errors raised by the planner, the controller and the harness.

Every error carries a machine-readable ``code`` that the command line maps
onto its exit status.
"""

EXIT_SUCCESS = 0
EXIT_NON_CONVERGENCE = 2
EXIT_AVOIDANCE_FAILURE = 3
EXIT_CONFIG_ERROR = 4


class MotionError(Exception):
    code = 1


class InvalidPoseError(MotionError, ValueError):
    """A quaternion or dual quaternion is off the unit manifold."""

    code = EXIT_CONFIG_ERROR


class DimensionError(MotionError, ValueError):
    code = EXIT_CONFIG_ERROR


class DegenerateGeometryError(MotionError, ValueError):
    """A direction was requested from a zero-length vector."""


class ModelError(MotionError):
    """A robot model, scene or demonstration file could not be used."""

    code = EXIT_CONFIG_ERROR


class ConfigError(MotionError):
    code = EXIT_CONFIG_ERROR


class NonConvergenceError(MotionError):
    """The planner hit its iteration budget before reaching the goal."""

    code = EXIT_NON_CONVERGENCE

    def __init__(self, message, path=None, error=None):
        super().__init__(message)
        self.path = path
        self.error = error


class AvoidanceFailure(MotionError):
    """No collision-free escape was found around an obstacle."""

    code = EXIT_AVOIDANCE_FAILURE


class StopRun(MotionError):
    """Closes a run early, like Scrapy's CloseSpider."""

    code = EXIT_NON_CONVERGENCE


class DropStep(Exception):
    """Raised by a step pipeline to keep a record out of the exports."""


class SilentDropStep(DropStep):
    pass
