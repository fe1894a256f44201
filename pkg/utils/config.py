# Configuration settings for the convergence-certification toolkit
APP_VERSION = "0.3.0"

# Solver
DEFAULT_TOL = 1e-10
MIN_TOL = 1e-12
MAX_TOL = 1e-6
ATOL_FACTOR = 1e-4  # atol = tol * ATOL_FACTOR
STIFFNESS_LIMIT = 1e5  # max L * t_end accepted by the explicit stepper
NORMALIZATION_DRIFT_WARN = 1e-9
NEGATIVE_PROBABILITY_SLACK = 1e-12
FIT_FLOOR = 1e-9  # gaps below this are solver noise, excluded from rate fits
DOUBLING_TOLERANCE = 1e-8
SIGN_DEAD_BAND = 1e-11
CONTRACTION_SLACK = 1e-6
CONTRACTION_FLOOR = 1e-7
DOMINANCE_SLACK = 1e-6
MAX_REPORT_PAIR_INDEX = 50

# Bounds
MAX_EXHAUSTIVE_SIZE = 22
DEFAULT_GRID_POINTS = 512  # points per period (or over the horizon if aperiodic)
PATTERN_CHUNK_ELEMENTS = 4_000_000
ORACLE_TOLERANCE = 1e-10
INJECTED_BUG_SIZE = 1e-6

# Intensity bound sampling
DEFAULT_INTENSITY_SAMPLES = 1024

# Parallelism
MAX_WORKERS = 4

# CLI exit codes
EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VIOLATION = 2
EXIT_UNCERTIFIED = 3
