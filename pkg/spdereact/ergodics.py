"""
Spatial-ergodicity statistics of the field: spatial averages over the observation window and their variance
against the explicit bound, occupation times, and empirical marginal densities against Gaussian envelopes.
"""
import logging
import math

import numpy as np
from scipy import integrate, stats

from .collections import StatTable
from .constants import DENSITY_MIN_PER_BIN, DENSITY_MIN_RUNS, ENVELOPE_SLACK
from .models import DensityDiagnostic, GridSpec, VarianceBound, VarianceBoundInputs
from .pipeline import run_monte_carlo
from .problem import alpha_of
from .simulate import NoiseIncrements, simulate

DERIVATIVE_GRID_POINTS = 4001


def _check_time_index(traj, t_index):
    if not 0 <= t_index <= traj.grid.n_time:
        raise IndexError("Time index %s outside [0, %s]." % (t_index, traj.grid.n_time))


def spatial_average(traj, g, t_index):
    _check_time_index(traj, t_index)
    window = traj.values[t_index, traj.window_mask]
    return float(traj.grid.dx * np.sum(g(window)))


def occupation_time(traj, a_low, a_high, t_index):
    """
    Measure of the window locations where the field lies in [a_low, a_high] at the given time.
    """
    if a_low > a_high:
        raise ValueError("Occupation interval needs a_low <= a_high, got [%s, %s]." % (a_low, a_high))
    _check_time_index(traj, t_index)
    window = traj.values[t_index, traj.window_mask]
    return float(traj.grid.dx * np.count_nonzero((window >= a_low) & (window <= a_high)))


def _support_grid(g, support, n_points):
    support = support or getattr(g, "support", None)
    if support is None:
        raise ValueError("Norms need a compact support.")
    return np.linspace(support[0], support[1], n_points)


def l1_norm(g, support=None, n_points=DERIVATIVE_GRID_POINTS):
    x = _support_grid(g, support, n_points)
    return float(integrate.trapezoid(np.abs(np.asarray(g(x), dtype=float)), x))


def derivative_norms(g, support=None, n_points=DERIVATIVE_GRID_POINTS):
    """
    (L1, L2, sup) norms of g' computed numerically over the support of g.
    """
    x = _support_grid(g, support, n_points)
    derivative = np.gradient(np.asarray(g(x), dtype=float), x)
    return (float(integrate.trapezoid(np.abs(derivative), x)),
            float(math.sqrt(integrate.trapezoid(derivative ** 2, x))),
            float(np.max(np.abs(derivative))))


def variance_bound(inputs):
    common = inputs.sigma ** 2 * inputs.gamma_measure * inputs.b_norm ** 2 * inputs.c0 ** 2 * inputs.t ** (1 - inputs.alpha)
    lt = inputs.lip * inputs.t
    with np.errstate(over="ignore"):
        exp_lt = float(np.exp(2 * lt))
        exp_c0_lt = float(np.exp(2 * inputs.c0 * lt))
    growth = 2 * (1 + exp_lt * lt ** 2)
    return VarianceBound(
        l1_case=common * inputs.g_norm_l1 ** 2 * inputs.p_max ** 2 * growth / (1 - inputs.alpha),
        l2_case=common * inputs.g_norm_l2 ** 2 * inputs.t ** (inputs.alpha / 2) * inputs.p_max
        * exp_c0_lt,
        inf_case=common * inputs.g_norm_inf ** 2 * inputs.t ** inputs.alpha * growth,
    )


def expectation_bound(g_norm_l1, gamma_measure, p_max, t, alpha):
    """
    Upper bound |Gamma| p_max t^(-alpha/2) ||g||_L1 on the mean of a spatial average of a non-negative g.
    """
    return gamma_measure * p_max * t ** (-alpha / 2) * g_norm_l1


def bound_inputs_for(model, g, t, p_max, c0=1.0):
    """
    Variance-bound inputs for a localised g under the given model, with the semigroup constant c0.
    """
    l1, l2, sup = derivative_norms(g)
    y = np.linspace(model.domain.gamma_left, model.domain.gamma_right, 101)
    return VarianceBoundInputs(g_norm_l1=l1, g_norm_l2=l2, g_norm_inf=sup, p_max=p_max,
                               gamma_measure=model.domain.gamma_measure,
                               b_norm=float(np.max(model.noise.dispersion(y))), c0=c0,
                               lip=model.reaction.lipschitz_bound, alpha=alpha_of(model.noise), t=t,
                               sigma=model.sigma)


def _variance_stderr(values):
    n = len(values)
    return float(np.var(values, ddof=1) * math.sqrt(2 / (n - 1)))


def pooled_p_max(values, t, alpha, n_bins=50):
    """
    Largest histogram density of all values pooled, scaled by t^(alpha/2).
    """
    values = np.ravel(values)
    n_bins = max(1, min(n_bins, values.size // DENSITY_MIN_PER_BIN))
    density, _ = np.histogram(values, bins=n_bins, density=True)
    return float(density.max() * t ** (alpha / 2))


def variance_scan(model, grid, g_family, t, n_runs, base_seed=0, workers=1, p_max=None, return_values=False):
    """
    Monte-Carlo variance of spatial averages for a family of localised functions, reported in units of sigma^2
    and of the explicit bound. Without p_max the constant is estimated from the pooled window values at time t.
    Pass return_values to also get the window values at time t, one row per run.
    """
    if n_runs < 100:
        raise ValueError("Variance scan needs at least 100 runs, got %s." % n_runs)
    t_index = grid.time_index(t)
    increments = NoiseIncrements(model.noise, grid, model.domain) if model.sigma > 0 else None

    def averages(seed):
        traj = simulate(model, grid, seed, increments)
        return [spatial_average(traj, g, t_index) for _, g in g_family], traj.values[t_index, traj.window_mask]

    logging.info("Scanning spatial-average variances for %s functions over %s runs.", len(g_family), n_runs)
    results = run_monte_carlo(averages, n_runs, base_seed, workers, desc="Computing spatial averages.")
    window_values = np.array([w for _, w in results])
    results = np.array([a for a, _ in results])
    table = StatTable()
    nu, sigma = model.nu, model.sigma
    if p_max is None and t > 0:
        p_max = pooled_p_max(window_values, t, alpha_of(model.noise))
        table.add(nu, sigma, "p_max_hat", p_max)
    for column, (h, g) in enumerate(g_family):
        values = results[:, column]
        variance = float(np.var(values, ddof=1))
        variance_se = _variance_stderr(values)
        table.add(nu, sigma, "mean[h=%g]" % h, np.mean(values), np.std(values, ddof=1) / math.sqrt(n_runs))
        table.add(nu, sigma, "variance[h=%g]" % h, variance, variance_se)
        if sigma > 0:
            table.add(nu, sigma, "variance_over_sigma2[h=%g]" % h, variance / sigma ** 2, variance_se / sigma ** 2)
        if p_max is not None:
            inputs = bound_inputs_for(model, g, t, p_max)
            bound = variance_bound(inputs).l1_case
            table.add(nu, sigma, "variance_bound_l1[h=%g]" % h, bound)
            if bound > 0:
                table.add(nu, sigma, "variance_over_bound[h=%g]" % h, variance / bound, variance_se / bound)
            table.add(nu, sigma, "expectation_bound[h=%g]" % h,
                      expectation_bound(l1_norm(g), inputs.gamma_measure, p_max, t, inputs.alpha))
    if return_values:
        return table, window_values
    return table


def occupation_concentration(model, grid, a_low, a_high, t, nu_list, n_runs, base_seed=0, workers=1):
    """
    Per nu: the occupation measure mu(A) as the Monte-Carlo mean of M(A) and the spread of M(A) / mu(A).
    """
    table = StatTable()
    for nu in nu_list:
        nu_model = model.with_nu(nu)
        nu_grid = GridSpec.for_model(nu_model, grid.n_space, grid.n_time)
        t_index = nu_grid.time_index(t)
        increments = NoiseIncrements(nu_model.noise, nu_grid, nu_model.domain) if nu_model.sigma > 0 else None

        def occupation(seed):
            return occupation_time(simulate(nu_model, nu_grid, seed, increments), a_low, a_high, t_index)

        logging.info("Computing occupation times at nu=%s.", nu)
        values = run_monte_carlo(occupation, n_runs, base_seed, workers,
                                    desc="Computing occupation times (nu=%g)." % nu)
        values = np.array(values)
        mu_hat = float(values.mean())
        table.add(nu, nu_model.sigma, "mu_hat", mu_hat,
                  np.std(values, ddof=1) / math.sqrt(n_runs) if n_runs > 1 else math.nan)
        if mu_hat == 0:
            logging.warning("Interval [%s, %s] never visited at nu=%s.", a_low, a_high, nu)
            table.add(nu, nu_model.sigma, "sd_ratio", math.nan)
            continue
        sd_ratio = float(np.std(values / mu_hat, ddof=1)) if n_runs > 1 else math.nan
        table.add(nu, nu_model.sigma, "sd_ratio", sd_ratio,
                  sd_ratio / math.sqrt(2 * (n_runs - 1)) if n_runs > 1 else math.nan)
    return table


def density_diagnostic(ensemble, y_index, n_bins=50, reference_sd=None, reference_mean=0.0,
                       envelope_slack=ENVELOPE_SLACK):
    """
    Histogram of X_t(y) over an ensemble, the implied p_max, and the number of bins above a Gaussian envelope
    C t^(-alpha/2) exp(-x^2 / (2 C1 t^alpha)) fitted by least squares on the log-density. A bin counts as a
    violation when it exceeds envelope_slack times the fit; pass 1.0 to compare against the plain fit.
    This is a diagnostic, not a test.
    """
    if ensemble.n_runs < DENSITY_MIN_RUNS:
        raise ValueError("Density diagnostic needs at least %s runs, got %s." % (DENSITY_MIN_RUNS, ensemble.n_runs))
    if not ensemble.t > 0:
        raise ValueError("Density diagnostic needs t > 0.")
    samples = ensemble.values[:, y_index]
    if ensemble.n_runs < DENSITY_MIN_PER_BIN * n_bins:
        widened = max(1, ensemble.n_runs // DENSITY_MIN_PER_BIN)
        logging.warning("Too few samples for %s bins, widening to %s bins.", n_bins, widened)
        n_bins = widened
    density, edges = np.histogram(samples, bins=n_bins, density=True)

    t = ensemble.t
    alpha = alpha_of(ensemble.model.noise)
    centred = (edges[:-1] + edges[1:]) / 2 - samples.mean()
    positive = density > 0
    if np.count_nonzero(positive) >= 2:
        slope, intercept = np.polyfit(centred[positive] ** 2, np.log(density[positive]), 1)
    else:
        slope, intercept = 0.0, float(np.log(density.max()))
    envelope_c = math.exp(intercept) * t ** (alpha / 2)
    envelope_c1 = -1 / (2 * slope * t ** alpha) if slope < 0 else math.inf
    envelope = envelope_slack * envelope_c * t ** (-alpha / 2) * np.exp(
        -centred ** 2 / (2 * envelope_c1 * t ** alpha) if math.isfinite(envelope_c1) else 0.0)

    ks_distance = None
    if reference_sd is not None:
        ks_distance = float(stats.kstest(samples, "norm", args=(reference_mean, reference_sd)).statistic)
    return DensityDiagnostic(bin_edges=edges, density=density, p_max_hat=float(density.max() * t ** (alpha / 2)),
                             envelope_violations=int(np.count_nonzero(density > envelope)),
                             envelope_c=envelope_c, envelope_c1=envelope_c1, envelope_slack=envelope_slack,
                             ks_distance=ks_distance)
