"""
Problem definitions, grids, realised fields and the reports built from them.

Spatial grids are vertex grids of interior points: for a domain (left, right) with n_space
interior points, y_k = left + (k + 1) * dx with dx = (right - left) / (n_space + 1),
k = 0, ..., n_space - 1. Time points are t_i = i * dt, i = 0, ..., n_time.
"""
from dataclasses import dataclass, field, replace
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .constants import Boundary, CsvHeaders, EstimatorMode, LIPSCHITZ_CHECK_PAIRS, NoiseKind
from .exceptions import ConfigError


class CsvRowMixin:
    """
    Mixin for records that serialise to a single CSV row. Subclasses list their columns in
    `csv_header` and implement `as_row`.
    """
    csv_header: List[str]

    def as_row(self):
        raise NotImplementedError

    def as_dict(self):
        return dict(zip(self.csv_header, self.as_row()))


@dataclass(frozen=True)
class Domain:
    left: float
    right: float
    boundary: Boundary
    gamma_left: float
    gamma_right: float

    def __post_init__(self):
        if not self.right > self.left:
            raise ConfigError("Domain requires right > left, got (%s, %s)." % (self.left, self.right))
        if not self.gamma_left < self.gamma_right:
            raise ConfigError("Observation window requires gamma_left < gamma_right.")
        if self.boundary is Boundary.Dirichlet:
            if not self.left < self.gamma_left or not self.gamma_right < self.right:
                raise ConfigError("Under Dirichlet conditions the observation window (%s, %s) must keep a positive "
                                  "distance to the boundary of (%s, %s)."
                                  % (self.gamma_left, self.gamma_right, self.left, self.right))
        elif self.gamma_left < self.left or self.gamma_right > self.right:
            raise ConfigError("Observation window (%s, %s) is not contained in (%s, %s)."
                              % (self.gamma_left, self.gamma_right, self.left, self.right))

    @property
    def length(self):
        return self.right - self.left

    @property
    def gamma_measure(self):
        return self.gamma_right - self.gamma_left

    def window_mask(self, y):
        y = np.asarray(y)
        return (y >= self.gamma_left) & (y <= self.gamma_right)

    def scaled(self, factor):
        """
        Image of the domain and window under y -> factor * y.
        """
        return replace(self, left=factor * self.left, right=factor * self.right,
                       gamma_left=factor * self.gamma_left, gamma_right=factor * self.gamma_right)


@dataclass(frozen=True)
class NoiseSpec:
    kind: NoiseKind = NoiseKind.White
    rho: Optional[float] = None
    rho1: Optional[float] = None
    rho2: Optional[float] = None
    multiplier: Optional[Callable] = None
    amplitudes: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.kind is NoiseKind.Riesz:
            if self.rho is None or not 0.5 < self.rho < 1:
                raise ConfigError("Riesz noise requires 1/2 < rho < 1, got %s." % self.rho)
        elif self.kind is NoiseKind.Spectral:
            if self.rho1 is None or self.rho2 is None:
                raise ConfigError("Spectral noise requires rho1 and rho2.")
            if not self.rho1 > 0 or not 0 <= self.rho2 < 0.5:
                raise ConfigError("Spectral noise requires rho1 > 0 and 0 <= rho2 < 1/2.")
            if self.rho1 + 2 * self.rho2 < 1:
                raise ConfigError("Spectral noise requires rho1 + 2 * rho2 >= 1.")
            if self.amplitudes is not None:
                object.__setattr__(self, "amplitudes", tuple(float(a) for a in self.amplitudes))

    @classmethod
    def white(cls, multiplier=None):
        return cls(NoiseKind.White, multiplier=multiplier)

    @classmethod
    def riesz(cls, rho):
        return cls(NoiseKind.Riesz, rho=rho)

    @classmethod
    def spectral(cls, rho1, rho2, amplitudes=None):
        return cls(NoiseKind.Spectral, rho1=rho1, rho2=rho2, amplitudes=amplitudes)

    def dispersion(self, y):
        """
        Pointwise dispersion Sigma(y); identically one without a multiplier.
        """
        y = np.asarray(y, dtype=float)
        if self.multiplier is None:
            return np.ones_like(y)
        values = np.broadcast_to(np.asarray(self.multiplier(y), dtype=float), y.shape)
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise ConfigError("Noise multiplier must be finite and bounded away from zero.")
        return values


@dataclass(frozen=True)
class ReactionFn:
    eval: Callable
    lipschitz_bound: float
    name: str = "custom"

    def __post_init__(self):
        if self.lipschitz_bound < 0:
            raise ConfigError("Lipschitz bound must be non-negative.")

    def __call__(self, x):
        return self.eval(x)

    def check_lipschitz(self, rng=None, n_pairs=LIPSCHITZ_CHECK_PAIRS, low=-20.0, high=20.0):
        """
        Spot-check the Lipschitz bound on random pairs. Raises ConfigError on violation.
        """
        rng = rng or np.random.default_rng(0)
        x = rng.uniform(low, high, n_pairs)
        y = rng.uniform(low, high, n_pairs)
        lhs = np.abs(np.asarray(self.eval(x), dtype=float) - np.asarray(self.eval(y), dtype=float))
        rhs = self.lipschitz_bound * np.abs(x - y)
        if np.any(lhs > rhs * (1 + 1e-12) + 1e-12):
            raise ConfigError("Reaction function %s violates its Lipschitz bound %s."
                              % (self.name, self.lipschitz_bound))
        return True


@dataclass(frozen=True)
class ModelSpec:
    domain: Domain
    nu: float
    noise: NoiseSpec
    reaction: ReactionFn
    horizon: float = 1.0
    initial: Optional[Callable] = None
    sigma_override: Optional[float] = None

    def __post_init__(self):
        if not self.nu > 0:
            raise ConfigError("Diffusivity nu must be positive, got %s." % self.nu)
        if not self.horizon > 0:
            raise ConfigError("Horizon T must be positive, got %s." % self.horizon)
        if self.sigma_override is not None and self.sigma_override < 0:
            raise ConfigError("Noise level sigma must be non-negative.")

    @property
    def sigma(self):
        if self.sigma_override is not None:
            return self.sigma_override
        from .problem import sigma_of_nu
        return sigma_of_nu(self.noise, self.nu)

    def initial_values(self, y):
        y = np.asarray(y, dtype=float)
        if self.initial is None:
            return np.zeros_like(y)
        return np.broadcast_to(np.asarray(self.initial(y), dtype=float), y.shape).copy()

    def with_nu(self, nu):
        """
        Same problem at another diffusivity, with sigma re-derived from the coupling law.
        """
        return replace(self, nu=nu, sigma_override=None)


@dataclass(frozen=True)
class GridSpec:
    n_space: int
    n_time: int
    dx: float
    dt: float

    def __post_init__(self):
        if self.n_space < 3:
            raise ConfigError("Grid needs at least 3 interior points, got %s." % self.n_space)
        if self.n_time < 1:
            raise ConfigError("Grid needs at least one time step.")
        if not self.dx > 0 or not self.dt > 0:
            raise ConfigError("Grid spacings must be positive.")

    @classmethod
    def for_model(cls, model, n_space, n_time=None):
        if n_time is None:
            n_time = n_space ** 2
        return cls(n_space=int(n_space), n_time=int(n_time),
                   dx=model.domain.length / (n_space + 1), dt=model.horizon / n_time)

    def points(self, domain):
        return domain.left + self.dx * np.arange(1, self.n_space + 1)

    def times(self):
        return self.dt * np.arange(self.n_time + 1)

    def time_index(self, t):
        i = int(round(t / self.dt))
        if not 0 <= i <= self.n_time:
            raise ConfigError("Time %s lies outside the grid [0, %s]." % (t, self.n_time * self.dt))
        return i

    def check_consistent(self, model):
        if not math.isclose(self.dx, model.domain.length / (self.n_space + 1), rel_tol=1e-9):
            raise ConfigError("Grid spacing dx=%s does not match the domain with %s interior points."
                              % (self.dx, self.n_space))
        if not math.isclose(self.dt, model.horizon / self.n_time, rel_tol=1e-9):
            raise ConfigError("Time step dt=%s does not match horizon %s with %s steps."
                              % (self.dt, model.horizon, self.n_time))


@dataclass(frozen=True, eq=False)
class Trajectory:
    values: np.ndarray
    grid: GridSpec
    model: ModelSpec
    seed: int = 0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n_time + 1, self.grid.n_space):
            raise ConfigError("Trajectory values have shape %s, expected %s."
                              % (values.shape, (self.grid.n_time + 1, self.grid.n_space)))
        if not np.all(np.isfinite(values)):
            raise ConfigError("Trajectory contains non-finite values.")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def y(self):
        return self.grid.points(self.model.domain)

    @property
    def t(self):
        return self.grid.times()

    @property
    def window_mask(self):
        return self.model.domain.window_mask(self.y)

    def __repr__(self):
        return "<%s: %s x %s, seed=%s>" % (self.__class__.__name__, self.grid.n_time + 1, self.grid.n_space, self.seed)


@dataclass(frozen=True)
class KernelPair:
    """
    One-sided kernels: k_minus supported in [-1, 0], k_plus in [0, 1], both non-negative.
    """
    k_minus: Callable
    k_plus: Callable

    def __post_init__(self):
        xs = np.linspace(-2.0, 2.0, 801)
        for name, kernel, (lo, hi) in (("k_minus", self.k_minus, (-1.0, 0.0)), ("k_plus", self.k_plus, (0.0, 1.0))):
            values = np.asarray(kernel(xs), dtype=float)
            if np.any(values < 0):
                raise ConfigError("Kernel %s takes negative values." % name)
            outside = (xs < lo) | (xs > hi)
            if np.any(values[outside] != 0):
                raise ConfigError("Kernel %s is not supported in [%s, %s]." % (name, lo, hi))
            if not np.any(values > 0):
                raise ConfigError("Kernel %s vanishes identically." % name)

    def scaled(self, a, b):
        from .estimate import ScaledKernel
        return KernelPair(ScaledKernel(self.k_minus, a), ScaledKernel(self.k_plus, b))


@dataclass(frozen=True)
class Weights(CsvRowMixin):
    t_m1: float
    t_p1: float
    t_m2: float
    t_p2: float
    i_m: float
    i_p: float

    csv_header = ["t_m1", "t_p1", "t_m2", "t_p2", "j", "i_m", "i_p"]

    @property
    def j(self):
        return self.t_m1 * self.t_p2 + self.t_p1 * self.t_m2

    def as_row(self):
        return [self.t_m1, self.t_p1, self.t_m2, self.t_p2, self.j, self.i_m, self.i_p]


@dataclass(frozen=True)
class EstimatorConfig:
    x0: float
    h: float
    kernels: KernelPair
    beta: float = 2.0
    nu_known: float = 1.0
    sigma: float = 1.0
    mode: EstimatorMode = EstimatorMode.SmallDiffusivity
    gamma: Optional[float] = None
    alpha_bar: float = 0.05

    def __post_init__(self):
        if not self.h > 0:
            raise ConfigError("Bandwidth h must be positive, got %s." % self.h)
        if not 1 <= self.beta <= 2:
            raise ConfigError("Smoothness beta must lie in [1, 2], got %s." % self.beta)
        if not 0 < self.alpha_bar < 1:
            raise ConfigError("Level alpha_bar must lie in (0, 1), got %s." % self.alpha_bar)
        if self.mode is EstimatorMode.GrowingWindow and (self.gamma is None or not self.gamma > 0):
            raise ConfigError("Growing-window mode requires a positive gamma.")

    @property
    def effective_sigma(self):
        return 1.0 if self.mode is EstimatorMode.GrowingWindow else self.sigma

    @property
    def effective_nu(self):
        return 1.0 if self.mode is EstimatorMode.GrowingWindow else self.nu_known

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class EstimateReport(CsvRowMixin):
    x0: float
    h: float
    f_hat: float
    std_error: float
    ci_low: float
    ci_high: float
    weights: Weights
    n_window_points: int
    alpha_bar: float = 0.05
    test_statistic: Optional[float] = None

    csv_header = CsvHeaders.EstimateReport

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError("Standard error must be non-negative.")
        if not self.ci_low <= self.f_hat <= self.ci_high:
            raise ValueError("Confidence interval [%s, %s] does not contain %s." % (self.ci_low, self.ci_high, self.f_hat))

    def contains(self, value):
        return self.ci_low <= value <= self.ci_high

    def as_row(self):
        return [self.x0, self.h, self.f_hat, self.std_error, self.ci_low, self.ci_high, self.n_window_points,
                self.weights.t_m1, self.weights.t_p1, self.weights.t_m2, self.weights.t_p2, self.weights.j,
                self.weights.i_m, self.weights.i_p]


@dataclass(frozen=True)
class TestResult:
    statistic: float
    reject: bool

    # Keep pytest from collecting this as a test class.
    __test__ = False


@dataclass(frozen=True)
class JointEstimate:
    nu_hat: float
    f_hat: float
    flat: bool = False
    objective: float = float("nan")


@dataclass(frozen=True)
class ComparisonReport:
    """
    Moment discrepancies between a field at rescaled locations and an independent simulation
    of the rescaled equation, at matched points of the final time.
    """
    points: np.ndarray
    mean_discrepancy: np.ndarray
    second_moment_discrepancy: np.ndarray
    mean_stderr: np.ndarray
    n_runs: int

    @property
    def max_mean_discrepancy(self):
        return float(np.max(np.abs(self.mean_discrepancy)))

    @property
    def max_second_moment_discrepancy(self):
        return float(np.max(np.abs(self.second_moment_discrepancy)))

    @property
    def max_z(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.abs(self.mean_discrepancy) / self.mean_stderr
        z = z[np.isfinite(z)]
        return float(np.max(z)) if z.size else float("nan")


@dataclass(frozen=True, eq=False)
class EnsembleSlice:
    values: np.ndarray
    t: float
    model: ModelSpec
    seeds: Sequence[int]
    grid: Optional[GridSpec] = None

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if values.shape[0] != len(self.seeds):
            raise ValueError("Ensemble has %s rows but %s seeds." % (values.shape[0], len(self.seeds)))
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("Ensemble rows must come from distinct seeds.")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "seeds", list(self.seeds))

    @property
    def n_runs(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class VarianceBoundInputs:
    g_norm_l1: float
    g_norm_l2: float
    g_norm_inf: float
    p_max: float
    gamma_measure: float
    b_norm: float
    c0: float
    lip: float
    alpha: float
    t: float
    sigma: float

    def __post_init__(self):
        for name in ("g_norm_l1", "g_norm_l2", "g_norm_inf", "p_max", "gamma_measure", "b_norm", "c0", "lip",
                     "t", "sigma"):
            if getattr(self, name) < 0:
                raise ValueError("%s must be non-negative." % name)
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1).")


@dataclass(frozen=True)
class VarianceBound:
    l1_case: float
    l2_case: float
    inf_case: float


@dataclass(frozen=True)
class DensityDiagnostic:
    bin_edges: np.ndarray
    density: np.ndarray
    p_max_hat: float
    envelope_violations: int
    envelope_c: float
    envelope_c1: float
    envelope_slack: float = 1.0
    ks_distance: Optional[float] = None

    @property
    def histogram(self):
        return list(zip(self.bin_edges[:-1], self.bin_edges[1:], self.density))


@dataclass(frozen=True)
class MCSummary:
    median: float
    q05: float
    q95: float
    q25: float
    q75: float
    iqr: float
    rmse: float
    coverage_rate: float


@dataclass
class MCReport:
    per_run: list
    summary: MCSummary
    n_failed: int = 0
    x0: Optional[float] = None
    true_f: Optional[float] = None


@dataclass
class ExperimentConfig:
    model: ModelSpec
    grid: GridSpec
    estimator: EstimatorConfig
    n_runs: int = 200
    base_seed: int = 0
    x0_grid: Optional[List[float]] = None
    nu_list: Optional[List[float]] = None
    gamma_list: Optional[List[float]] = None
    h_list: Optional[List[float]] = None
    output_dir: str = "."
    workers: int = 1
    t: Optional[float] = None
    a_low: float = 0.5
    a_high: float = 1.5
    zeta: Optional[float] = None
    trajectory: Optional[str] = None
    csv_time_stride: int = 1
    n_bins: int = 50
    p_max: Optional[float] = None
    buffer: float = 5.0
    growing_dx: float = 0.1
    bandwidth_scale: float = 1.0
    joint: bool = False
    nu_bracket: Tuple[float, float] = (1e-4, 1.0)
    raw: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_runs < 1:
            raise ConfigError("n_runs must be at least 1.")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1.")

    @property
    def seeds(self):
        return [self.base_seed + r for r in range(self.n_runs)]
