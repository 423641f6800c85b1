"""
Pointwise estimation of the reaction function at x0 from a space-time field.

Both one-sided kernels are localised at x0 with bandwidth h and combined into a random kernel whose weights
come from the data, so that on the observed index set the kernel integrates to one and has a vanishing
first moment around x0. The estimate is the kernel-weighted average of the time increments corrected by
the discrete generator nu * Laplace(X).
"""
import logging

import numpy as np
from scipy import optimize, stats

from .constants import Boundary
from .exceptions import BracketError, DegenerateWindowError
from .models import EstimateReport, JointEstimate, KernelPair, TestResult, Weights

# Coarse log-spaced scan used to seed the golden-section bracket of the joint estimate.
BRACKET_SCAN_POINTS = 17
FLAT_OBJECTIVE_TOL = 1e-12


class TentKernel:
    """
    Triangular kernel max(0, 1 - |2 (x - centre)|), supported on [centre - 1/2, centre + 1/2].
    """

    def __init__(self, centre):
        self.centre = centre
        self.support = (centre - 0.5, centre + 0.5)

    def __call__(self, x):
        value = np.maximum(0.0, 1 - np.abs(2 * (np.asarray(x, dtype=float) - self.centre)))
        return value.item() if value.ndim == 0 else value

    def __repr__(self):
        return "<%s: %s>" % (self.__class__.__name__, self.support)


class ScaledKernel:

    def __init__(self, kernel, factor):
        if not factor > 0:
            raise ValueError("Kernel scale factor must be positive.")
        self.kernel = kernel
        self.factor = factor
        self.support = getattr(kernel, "support", None)

    def __call__(self, x):
        return self.factor * self.kernel(x)


class Localized:
    """
    x -> g((x - x0) / h).
    """

    def __init__(self, g, h, x0):
        self.g = g
        self.h = h
        self.x0 = x0
        support = getattr(g, "support", None)
        self.support = (x0 + h * support[0], x0 + h * support[1]) if support is not None else None

    def __call__(self, x):
        return self.g((np.asarray(x, dtype=float) - self.x0) / self.h)

    def __repr__(self):
        return "<%s: h=%s, x0=%s>" % (self.__class__.__name__, self.h, self.x0)


class RandomKernel:
    """
    Data-driven kernel (t_p2 * K_minus_h + t_m2 * K_plus_h) / j.
    """

    def __init__(self, weights, kernels, h, x0):
        if not weights.j > 0:
            raise DegenerateWindowError("No usable data on both sides of x0=%s with h=%s (j=%s)." % (x0, h, weights.j))
        self.weights = weights
        self.k_minus = localize(kernels.k_minus, h, x0)
        self.k_plus = localize(kernels.k_plus, h, x0)
        self.support = (x0 - h, x0 + h)

    def __call__(self, x):
        w = self.weights
        return (w.t_p2 * self.k_minus(x) + w.t_m2 * self.k_plus(x)) / w.j


def default_kernels():
    return KernelPair(TentKernel(-0.5), TentKernel(0.5))


def localize(g, h, x0):
    if not h > 0:
        raise ValueError("Bandwidth h must be positive, got %s." % h)
    return Localized(g, h, x0)


def random_kernel(weights, kernels, h, x0):
    return RandomKernel(weights, kernels, h, x0)


def discrete_laplacian(values, dx, boundary):
    """
    Second differences along the last axis with boundary ghost values: zero for Dirichlet, a copy of the edge
    cell for Neumann, matching the implicit scheme.
    """
    values = np.asarray(values, dtype=float)
    if boundary is Boundary.Dirichlet:
        padded = np.pad(values, [(0, 0)] * (values.ndim - 1) + [(1, 1)], mode="constant")
    else:
        padded = np.pad(values, [(0, 0)] * (values.ndim - 1) + [(1, 1)], mode="edge")
    return (padded[..., :-2] - 2 * padded[..., 1:-1] + padded[..., 2:]) / dx ** 2


def discrete_generator(traj, i, k):
    n_rows, n_space = traj.values.shape
    if not 0 <= i < n_rows or not 0 <= k < n_space:
        raise IndexError("Cell (%s, %s) lies outside the %s x %s grid." % (i, k, n_rows, n_space))
    row = traj.values[i]
    if 0 < k < n_space - 1:
        left, right = row[k - 1], row[k + 1]
    elif traj.model.domain.boundary is Boundary.Dirichlet:
        left = row[k - 1] if k > 0 else 0.0
        right = row[k + 1] if k < n_space - 1 else 0.0
    else:
        left = row[k - 1] if k > 0 else row[k]
        right = row[k + 1] if k < n_space - 1 else row[k]
    return (left - 2 * row[k] + right) / traj.grid.dx ** 2


class ObservedField:
    """
    Field values, time increments and discrete generator on the index set used by the estimator: all time
    points but the last (forward differences) at all cells inside the observation window.
    """

    def __init__(self, traj):
        mask = traj.window_mask
        values = traj.values
        self.dx = traj.grid.dx
        self.dt = traj.grid.dt
        self.x = values[:-1, mask]
        self.increments = np.diff(values, axis=0)[:, mask] / self.dt
        self.generator = discrete_laplacian(values[:-1], self.dx, traj.model.domain.boundary)[:, mask]
        self.dispersion_sq = traj.model.noise.dispersion(traj.y[mask]) ** 2

    @property
    def cell_measure(self):
        return self.dt * self.dx


def _weights(field, cfg):
    k_minus = localize(cfg.kernels.k_minus, cfg.h, cfg.x0)(field.x)
    k_plus = localize(cfg.kernels.k_plus, cfg.h, cfg.x0)(field.x)
    offset = field.x - cfg.x0
    measure = field.cell_measure
    weights = Weights(
        t_m1=measure * k_minus.sum(),
        t_p1=measure * k_plus.sum(),
        t_m2=-measure * (k_minus * offset).sum(),
        t_p2=measure * (k_plus * offset).sum(),
        i_m=measure * (field.dispersion_sq * k_minus ** 2).sum(),
        i_p=measure * (field.dispersion_sq * k_plus ** 2).sum(),
    )
    return weights, int(np.count_nonzero((k_minus + k_plus) > 0))


def compute_weights(traj, cfg):
    weights, _ = _weights(ObservedField(traj), cfg)
    return weights


def normal_quantile(alpha_bar):
    return float(stats.norm.ppf(1 - alpha_bar / 2))


def _report(field, cfg, nu, zeta=None):
    weights, n_window_points = _weights(field, cfg)
    kernel = random_kernel(weights, cfg.kernels, cfg.h, cfg.x0)
    k_hat = kernel(field.x)
    f_hat = float((k_hat * (field.increments - nu * field.generator)).sum() / k_hat.sum())
    std_error = float(cfg.effective_sigma * np.sqrt(weights.t_p2 ** 2 * weights.i_m + weights.t_m2 ** 2 * weights.i_p)
                      / weights.j)
    half_width = normal_quantile(cfg.alpha_bar) * std_error
    statistic = (f_hat - zeta) / std_error if zeta is not None and std_error > 0 else None
    return EstimateReport(x0=cfg.x0, h=cfg.h, f_hat=f_hat, std_error=std_error, ci_low=f_hat - half_width,
                          ci_high=f_hat + half_width, weights=weights, n_window_points=n_window_points,
                          alpha_bar=cfg.alpha_bar, test_statistic=statistic)


def estimate(traj, cfg, zeta=None):
    """
    Estimate f(x0) with its studentized standard error and (1 - alpha_bar) confidence interval. Pass zeta to
    also record the test statistic for H0: f(x0) = zeta.
    """
    return _report(ObservedField(traj), cfg, cfg.effective_nu, zeta)


def estimate_curve(traj, cfg, x0_grid, on_degenerate=None):
    """
    Estimates over a grid of x0 from one pass over the field. Points without data on both sides are skipped, or
    replaced by on_degenerate(x0, error) when given.
    """
    field = ObservedField(traj)
    reports = []
    for x0 in x0_grid:
        try:
            reports.append(_report(field, cfg.replace(x0=x0), cfg.effective_nu))
        except DegenerateWindowError as e:
            if on_degenerate is None:
                logging.warning("Skipping x0=%s: %s", x0, e)
            else:
                reports.append(on_degenerate(x0, e))
    return reports


def hypothesis_test(report, zeta, alpha_bar=0.05):
    if not report.std_error > 0:
        raise ValueError("Test statistic needs a positive standard error.")
    statistic = (report.f_hat - zeta) / report.std_error
    return TestResult(statistic=statistic, reject=bool(abs(statistic) > normal_quantile(alpha_bar)))


def select_bandwidth(sigma, beta, gamma=None, scale=1.0):
    """
    h = scale * sigma^(2 / (1 + 2 beta)), balancing the bias h^beta against the stochastic error sigma h^(-1/2).
    With a growing window of size gamma the same balance gives h = scale * gamma^(-1 / (1 + 2 beta)).
    """
    if not 1 <= beta <= 2:
        raise ValueError("Smoothness beta must lie in [1, 2], got %s." % beta)
    if gamma is not None:
        if not gamma > 0:
            raise ValueError("Window size gamma must be positive, got %s." % gamma)
        return scale * gamma ** (-1 / (1 + 2 * beta))
    if not sigma > 0:
        raise ValueError("Noise level sigma must be positive, got %s." % sigma)
    return scale * sigma ** (2 / (1 + 2 * beta))


class WlsObjective:
    """
    Kernel-weighted least-squares criterion sum K_hat (Y - nu A X - zeta)^2, profiled over zeta.
    """

    def __init__(self, traj, cfg):
        self.field = ObservedField(traj)
        weights, _ = _weights(self.field, cfg)
        k_hat = random_kernel(weights, cfg.kernels, cfg.h, cfg.x0)(self.field.x)
        self.k_hat = k_hat / k_hat.sum()

    def f_hat(self, nu):
        return float((self.k_hat * (self.field.increments - nu * self.field.generator)).sum())

    def __call__(self, nu):
        residual = self.field.increments - nu * self.field.generator - self.f_hat(nu)
        return float((self.k_hat * residual ** 2).sum())

    @property
    def generator_spread(self):
        generator = self.field.generator
        mean = (self.k_hat * generator).sum()
        return float((self.k_hat * (generator - mean) ** 2).sum())


def wls_objective(traj, cfg, nu):
    return WlsObjective(traj, cfg)(nu)


def joint_estimate(traj, cfg, bracket=(1e-4, 1.0)):
    """
    Minimise the least-squares criterion jointly over (nu, zeta). For fixed nu the inner minimiser is the
    estimate itself, so a golden-section search over nu remains.
    """
    lo, hi = bracket
    if not 0 < lo < hi:
        raise BracketError("Bracket (%s, %s) must satisfy 0 < lo < hi." % (lo, hi))
    objective = WlsObjective(traj, cfg)
    if objective.generator_spread <= FLAT_OBJECTIVE_TOL:
        nu_hat = (lo + hi) / 2
        logging.warning("Objective is flat in nu; returning bracket midpoint %s.", nu_hat)
        return JointEstimate(nu_hat=nu_hat, f_hat=objective.f_hat(nu_hat), flat=True, objective=objective(nu_hat))

    scan = np.geomspace(lo, hi, BRACKET_SCAN_POINTS)
    values = [objective(nu) for nu in scan]
    best = int(np.argmin(values))
    if best in (0, len(scan) - 1):
        raise BracketError("Objective is minimal at the edge of the bracket (%s, %s)." % (lo, hi))
    result = optimize.minimize_scalar(objective, bracket=(scan[best - 1], scan[best], scan[best + 1]),
                                      method="golden")
    if not lo <= result.x <= hi:
        raise BracketError("Minimiser %s left the bracket (%s, %s)." % (result.x, lo, hi))
    return JointEstimate(nu_hat=float(result.x), f_hat=objective.f_hat(result.x), objective=float(result.fun))
