# Settings for the motion project
#
# Every value here is a default. An experiment YAML file overrides it with
# "project" priority and command-line flags override both with "cmdline"
# priority (see motion/config.py).

# Numerical tolerances

UNIT_TOLERANCE = 1e-9  # unit-norm / orthogonality defect of a unit dual quaternion
POSE_INPUT_TOLERANCE = 1e-3  # hand-written rotations are renormalized below this defect
SMALL_ANGLE = 1e-6  # below this rotation angle the series expansions are used
DUPLICATE_TOLERANCE = 1e-10  # consecutive demo poses closer than this are collapsed

# Planner (task space imitation)

TAU_STEP = 0.01
GUIDING_FRACTION = 0.2  # heuristic band is 0.2 - 0.7 of the imitated path length
GOAL_TOLERANCE = 1e-3
MAX_ITERATIONS = None  # None = 10 * n / TAU_STEP

# Obstacle avoidance (escape trees)

SHELL_FACTOR = 1.5  # shell_radius = SHELL_FACTOR * radius when a scene omits it
K_ETA = None  # None = shell radius of the obstacle being escaped
MAX_DEPTH = 5
MAX_RESAMPLES = 3
K_ETA_GROWTH = 2.0
ESCAPE_COST = "goal_distance"  # or "path_length"
ESCAPE_SAMPLES = 8  # random in-plane samples drawn per resample
ESCAPE_MARGIN = 0.03  # clearance kept by escape waypoints beyond the obstacle radius
DETOUR_STEP = 0.005  # spacing (m) of the poses executed along a detour

# Controller

LAMBDA_E = 10.0
DAMPING = 0.01
DT = 1e-3
QDOT_MAX = None  # rad/s (or m/s) for every joint, replaces the model limits when set
NULLSPACE_GAIN = 1.0
CONTROL_SUBSTEPS = 10  # controller steps per planner iteration
LITERAL_OBSTACLE_LAW = False
SAFETY_MARGIN = 0.02  # the safety layer engages this far outside an obstacle surface
IK_ITERATIONS = 2000
IK_DT = 0.01
IK_TOLERANCE = 1e-6

# Harness

ROBOT = "planar3"
DEMO = None
SCENE = None
START_CONFIG = None
START_POSE = None
START_SEED = None  # initial joints for solving a start pose, None = mid-range
GOAL = None
GOALS = []  # extra goals chained after GOAL with the same demonstration
SEED = 0
POSE_NOISE = 0.0  # standard deviation (m / rad) of Gaussian noise on measured poses
TIME_LIMIT = 0  # seconds of wall-clock per run, 0 for no limit
OUTPUT_DIR = "output"
BATCH_WORKERS = 4

# Configure step pipelines, run in ascending order
STEP_PIPELINES = {
    "motion.pipelines.ClearancePipeline": 100,
    "motion.pipelines.MetricsPipeline": 200,
    "motion.pipelines.CsvExportPipeline": 800,
    "motion.pipelines.PlotDataPipeline": 900,
}

CSV_FIELDS = [
    "step",
    "time",
    "q",
    "x_m",
    "x_d",
    "goal_error",
    "min_clearance",
    "avoidance_active",
]

# Logging
LOG_LEVEL = "INFO"
LOG_FORMAT = "%(asctime)s [%(name)s] %(levelname)s: %(message)s"
QUIET_LOGGERS = ["scrapy", "twisted", "py.warnings"]
