"""Experiment configuration.

Settings are layered with Scrapy's priorities: the defaults of
``motion.settings`` (loaded through ``get_project_settings``), then the
experiment YAML file at "project" priority, then command-line flags at
"cmdline" priority. The YAML file is validated against the schema in the
repository's ``config.yaml``.
"""

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field

import fastjsonschema
import numpy as np
import yaml

from scrapy.utils.project import get_project_settings

from . import settings as motion_settings
from .controller import ControllerParams
from .exceptions import ConfigError, InvalidPoseError
from .formats import load_pose
from .repet import RepetParams
from .tsia import PlannerParams

logger = logging.getLogger(__name__)

SCHEMA_FILE = os.path.join(os.path.dirname(os.path.dirname(__file__)), "config.yaml")

TOP_LEVEL_KEYS = {
    "robot": "ROBOT",
    "demo": "DEMO",
    "scene": "SCENE",
    "goal": "GOAL",
    "goals": "GOALS",
    "output": "OUTPUT_DIR",
    "seed": "SEED",
    "noise": "POSE_NOISE",
    "time_limit": "TIME_LIMIT",
}

SECTION_KEYS = {
    "start": {
        "config": "START_CONFIG",
        "pose": "START_POSE",
        "seed": "START_SEED",
    },
    "planner": {
        "tau_step": "TAU_STEP",
        "guiding_fraction": "GUIDING_FRACTION",
        "goal_tolerance": "GOAL_TOLERANCE",
        "max_iterations": "MAX_ITERATIONS",
    },
    "controller": {
        "lambda_e": "LAMBDA_E",
        "damping": "DAMPING",
        "dt": "DT",
        "qdot_max": "QDOT_MAX",
        "nullspace_gain": "NULLSPACE_GAIN",
        "substeps": "CONTROL_SUBSTEPS",
        "safety_margin": "SAFETY_MARGIN",
        "literal_obstacle_law": "LITERAL_OBSTACLE_LAW",
    },
    "repet": {
        "k_eta": "K_ETA",
        "max_depth": "MAX_DEPTH",
        "max_resamples": "MAX_RESAMPLES",
        "growth": "K_ETA_GROWTH",
        "cost": "ESCAPE_COST",
        "samples": "ESCAPE_SAMPLES",
        "margin": "ESCAPE_MARGIN",
        "detour_step": "DETOUR_STEP",
        "shell_factor": "SHELL_FACTOR",
    },
}

PATH_KEYS = ("ROBOT", "DEMO", "SCENE")

# Settings that change what a run computes
HASHED_KEYS = (
    "ROBOT", "DEMO", "SCENE", "START_CONFIG", "START_POSE", "START_SEED", "GOAL",
    "GOALS", "SEED", "POSE_NOISE",
    *(key for section in SECTION_KEYS.values() for key in section.values()),
)

_validator = None


def _schema_validator():
    global _validator
    if _validator is None:
        with open(SCHEMA_FILE, "r") as file:
            _validator = fastjsonschema.compile(yaml.safe_load(file))
    return _validator


def load_config(path):
    """Read and validate an experiment file, returning the settings it sets."""

    try:
        with open(path, "r") as file:
            data = yaml.safe_load(file) or {}
    except OSError as e:
        raise ConfigError(f"Could not read experiment file {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"Could not parse experiment file {path}: {e}") from e

    try:
        _schema_validator()(data)
    except fastjsonschema.JsonSchemaException as e:
        raise ConfigError(f"{path}: {e.message}") from e

    values = {}
    for key, name in TOP_LEVEL_KEYS.items():
        if key in data:
            values[name] = data[key]
    for section, keys in SECTION_KEYS.items():
        for key, name in keys.items():
            if key in data.get(section, {}):
                values[name] = data[section][key]

    # file references are relative to the experiment file
    base = os.path.dirname(os.path.abspath(path))
    for name in PATH_KEYS:
        value = values.get(name)
        if value and not os.path.isabs(value):
            candidate = os.path.join(base, value)
            if os.path.exists(candidate):
                values[name] = candidate
    if values.get("OUTPUT_DIR") and not os.path.isabs(values["OUTPUT_DIR"]):
        values["OUTPUT_DIR"] = os.path.join(base, values["OUTPUT_DIR"])

    return values


def get_settings(config_path=None, overrides=None):
    os.environ.setdefault("SCRAPY_SETTINGS_MODULE", motion_settings.__name__)
    settings = get_project_settings()

    if config_path:
        settings.setdict(load_config(config_path), priority="project")
    if overrides:
        settings.setdict(
            {k: v for k, v in overrides.items() if v is not None}, priority="cmdline"
        )
    return settings


def config_hash(settings):
    """SHA-256 of the settings that determine a run."""

    values = {key: settings.get(key) for key in HASHED_KEYS}
    text = json.dumps(values, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def _pose(settings, key):
    value = settings.get(key)
    if value is None:
        return None
    try:
        return load_pose(value)
    except InvalidPoseError as e:
        raise ConfigError(f"{key}: {e}") from e


def _vector(settings, key):
    value = settings.get(key)
    if value is None:
        return None
    if isinstance(value, str):
        value = value.replace(",", " ").split()
    try:
        return np.array([float(v) for v in value])
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{key}: {e}") from e


@dataclass
class ExperimentConfig:
    robot: str
    demo: str
    goal: object
    scene: str = None
    start_config: np.ndarray = None
    start_pose: object = None
    start_seed: np.ndarray = None
    goals: list = field(default_factory=list)
    planner: PlannerParams = field(default_factory=PlannerParams)
    controller: ControllerParams = field(default_factory=ControllerParams)
    repet: RepetParams = field(default_factory=RepetParams)
    substeps: int = motion_settings.CONTROL_SUBSTEPS
    detour_step: float = motion_settings.DETOUR_STEP
    output_dir: str = motion_settings.OUTPUT_DIR
    seed: int = motion_settings.SEED
    noise: float = motion_settings.POSE_NOISE
    time_limit: float = motion_settings.TIME_LIMIT
    config_hash: str = ""

    def __post_init__(self):
        if (self.start_config is None) == (self.start_pose is None):
            raise ConfigError("Give exactly one of a start configuration or a start pose")
        if self.goal is None:
            raise ConfigError("No goal pose given")
        if self.substeps < 1:
            raise ConfigError("Controller substeps must be at least 1")

    @classmethod
    def from_settings(cls, settings, **fields):
        """Build from resolved settings. Keyword arguments replace single fields."""

        try:
            goals = [load_pose(g) for g in settings.getlist("GOALS")]
        except InvalidPoseError as e:
            raise ConfigError(f"GOALS: {e}") from e

        values = dict(
            robot=settings.get("ROBOT"),
            demo=settings.get("DEMO"),
            scene=settings.get("SCENE"),
            goal=_pose(settings, "GOAL"),
            goals=goals,
            start_config=_vector(settings, "START_CONFIG"),
            start_pose=_pose(settings, "START_POSE"),
            start_seed=_vector(settings, "START_SEED"),
            planner=PlannerParams.from_settings(settings),
            controller=ControllerParams.from_settings(settings),
            repet=RepetParams.from_settings(settings),
            substeps=settings.getint("CONTROL_SUBSTEPS"),
            detour_step=settings.getfloat("DETOUR_STEP"),
            output_dir=settings.get("OUTPUT_DIR"),
            seed=settings.getint("SEED"),
            noise=settings.getfloat("POSE_NOISE"),
            time_limit=settings.getfloat("TIME_LIMIT"),
            config_hash=config_hash(settings),
        )
        values.update(fields)
        return cls(**values)
