import enum
import os.path


class Boundary(enum.Enum):
    Dirichlet = "dirichlet"
    Neumann = "neumann"


class NoiseKind(enum.Enum):
    White = "white"
    Riesz = "riesz"
    Spectral = "spectral"


class EstimatorMode(enum.Enum):
    SmallDiffusivity = "small_diffusivity"
    GrowingWindow = "growing_window"


class CsvHeaders:
    Trajectory = ["t", "y", "value"]
    Realisation = ["nu", "t", "y", "value", "near_x0"]
    EstimateReport = ["x0", "h", "f_hat", "std_error", "ci_low", "ci_high", "n_window_points",
                      "t_m1", "t_p1", "t_m2", "t_p2", "j", "i_m", "i_p"]
    StatTable = ["nu", "sigma", "stat", "value", "mc_stderr"]
    Histogram = ["bin_left", "bin_right", "density"]
    FigureLeft = ["x0", "median", "q05", "q95", "iqr", "true_f"]
    FigureRight = ["x0", "iqr"]
    Rate = ["nu", "sigma", "h", "rmse", "n_ok", "n_failed"]
    Coverage = ["x0", "alpha_bar", "coverage_rate", "n_ok", "n_failed"]
    GrowingWindow = ["gamma", "h", "rmse", "normalized_average_var", "n_ok", "n_failed"]
    RescaleCheck = ["y", "mean_discrepancy", "second_moment_discrepancy", "mean_stderr"]


class OutputFiles:
    FigureLeft = "figure3_left.csv"
    FigureRight = "figure3_right.csv"
    FigureScript = "figure3.gp"
    Rate = "rate.csv"
    RateScript = "rate.gp"
    Coverage = "coverage.csv"
    GrowingWindow = "growing_window.csv"
    GrowingWindowScript = "growing_window.gp"
    Occupation = "occupation.csv"
    VarianceScan = "variance_scan.csv"
    RescaleCheck = "rescale_check.csv"
    Estimate = "estimate.csv"
    TrajectoryCsv = "trajectory.csv"
    TrajectoryBin = "trajectory.bin"
    Realisation = "figure2.csv"
    RealisationScript = "figure2.gp"
    Manifest = "manifest.json"
    Histogram = "density.csv"
    SummaryStats = "summary_stats.txt"


# Desk-scale defaults, scaled down from 500 cells / 500**2 steps / 10**4 runs.
DEFAULT_N_SPACE = 200
DEFAULT_N_RUNS = 200
DEFAULT_BASE_SEED = 0
DEFAULT_NU = 0.001
DEFAULT_HORIZON = 1.0
DEFAULT_DOMAIN = (0.0, 1.0)
DEFAULT_WINDOW = (0.1, 0.9)
DEFAULT_X0 = 1.0
DEFAULT_BETA = 2.0
DEFAULT_ALPHA_BAR = 0.05
DEFAULT_OCCUPATION_WINDOW = (0.5, 1.5)
DEFAULT_GROWING_DX = 0.1
DEFAULT_NU_BRACKET = (1e-4, 1.0)

ALLEN_CAHN_LIPSCHITZ = 291.0
ALLEN_CAHN_CUTOFF = 10.0

# Growing windows sit inside a Neumann interval with this margin on each side.
GROWING_WINDOW_BUFFER = 5.0

RIESZ_QUADRATURE_RANGE = 50.0
RIESZ_QUADRATURE_TOL = 1e-6
COVARIANCE_JITTER = 1e-10

RESCALE_SEED_OFFSET = 1_000_003
LIPSCHITZ_CHECK_PAIRS = 1000

# Half-width of the level band around x0 highlighted in the realisation figure.
REALISATION_BAND = 0.5

DENSITY_MIN_RUNS = 1000
DENSITY_MIN_PER_BIN = 10
ENVELOPE_SLACK = 1.25

CONFIG_SECTIONS = ("model", "grid", "estimator", "experiment")

WORKERS_ENV_VAR = "SPDE_REACT_WORKERS"
ACCEPTANCE_ENV_VAR = "SPDE_REACT_ACCEPTANCE"

LOG_DIR_NAME = ".log"

PERC_ALLOCATED_VRAM = 75


def log_dir(output_dir):
    return os.path.join(output_dir, LOG_DIR_NAME)
