"""
Monte-Carlo experiments built on simulate and estimate. Every experiment writes its CSV tables into the
configured output directory and returns result objects; per-run seeds are base_seed + run_index.
"""
from dataclasses import dataclass, field
import logging
import math
import os.path

import numpy as np
from scipy import stats

from .collections import EstimateReportList, ResultTable
from .constants import Boundary, CsvHeaders, EstimatorMode, OutputFiles, REALISATION_BAND
from .ergodics import density_diagnostic, occupation_concentration, spatial_average, variance_scan
from .estimate import (default_kernels, estimate, estimate_curve, hypothesis_test, joint_estimate, localize,
                       select_bandwidth)
from .exceptions import ConfigError, DegenerateWindowError
from .models import Domain, EnsembleSlice, GridSpec, MCReport, MCSummary, ModelSpec
from .pipeline import run_monte_carlo
from .postprocess import (FIGURE_SCRIPT, GROWING_WINDOW_SCRIPT, RATE_SCRIPT, write_comparison, write_histogram,
                          write_realisation_script, write_script, write_summary_stats)
from .problem import rate_exponent
from .simulate import (NoiseIncrements, read_trajectory_binary, rescale_check, simulate, write_realisation_csv,
                       write_trajectory_binary, write_trajectory_csv)
from .utils import RunFailure


def summarize(f_hats, true_f, reports=()):
    """
    Median, quantiles, IQR and RMSE of the estimates, and the share of confidence intervals containing true_f.
    """
    f_hats = np.asarray(f_hats, dtype=float)
    if f_hats.size == 0:
        return MCSummary(*(math.nan,) * 8)
    q05, q25, median, q75, q95 = np.quantile(f_hats, [0.05, 0.25, 0.5, 0.75, 0.95])
    reports = list(reports)
    coverage = sum(r.contains(true_f) for r in reports) / len(reports) if reports else math.nan
    return MCSummary(median=float(median), q05=float(q05), q95=float(q95), q25=float(q25), q75=float(q75),
                     iqr=float(q75 - q25), rmse=float(np.sqrt(np.mean((f_hats - true_f) ** 2))),
                     coverage_rate=coverage)


def mc_report(per_run, true_f, x0=None):
    per_run = EstimateReportList(per_run)
    return MCReport(per_run=per_run, summary=summarize(per_run.f_hats, true_f, per_run.reports),
                    n_failed=per_run.n_failed, x0=x0, true_f=true_f)


def _estimates_over_x0(model, grid, estimator, x0_list, n_runs, base_seed, workers, desc):
    """
    One simulation per run, estimated at every x0. Returns per-x0 lists of reports, failed x0 as RunFailure.
    """
    increments = NoiseIncrements(model.noise, grid, model.domain) if model.sigma > 0 else None

    def task(seed):
        traj = simulate(model, grid, seed, increments)

        def failure(x0, e):
            logging.debug("Seed %s, x0=%s: %s", seed, x0, e)
            return RunFailure(seed - base_seed, str(e))

        return estimate_curve(traj, estimator, x0_list, on_degenerate=failure)

    results = run_monte_carlo(task, n_runs, base_seed, workers, desc=desc)
    return [[run[j] for run in results] for j in range(len(x0_list))]


def true_value(model, x0):
    return float(model.reaction(x0))


def run_figure_experiment(cfg):
    """
    Distribution of the estimates over a grid of x0: median, 5% and 95% quantiles and IQR per x0.
    """
    if not cfg.x0_grid:
        raise ConfigError("The figure experiment needs a non-empty x0_grid.")
    logging.info("Estimating at %s points with %s runs each.", len(cfg.x0_grid), cfg.n_runs)
    per_x0 = _estimates_over_x0(cfg.model, cfg.grid, cfg.estimator, cfg.x0_grid, cfg.n_runs, cfg.base_seed,
                                cfg.workers, desc="Simulating and estimating over x0 grid.")
    reports = {x0: mc_report(runs, true_value(cfg.model, x0), x0) for x0, runs in zip(cfg.x0_grid, per_x0)}

    left = ResultTable(CsvHeaders.FigureLeft)
    right = ResultTable(CsvHeaders.FigureRight)
    for x0, report in reports.items():
        s = report.summary
        left.append([x0, s.median, s.q05, s.q95, s.iqr, report.true_f])
        right.append([x0, s.iqr])
        if report.n_failed:
            logging.warning("x0=%s: %s of %s runs without data on both sides.", x0, report.n_failed, cfg.n_runs)
    left.write_csv(os.path.join(cfg.output_dir, OutputFiles.FigureLeft))
    right.write_csv(os.path.join(cfg.output_dir, OutputFiles.FigureRight))
    write_script(FIGURE_SCRIPT, os.path.join(cfg.output_dir, OutputFiles.FigureScript),
                 left=OutputFiles.FigureLeft, right=OutputFiles.FigureRight)
    write_summary_stats(cfg.output_dir, "figure", cfg.n_runs * len(cfg.x0_grid),
                        sum(r.n_failed for r in reports.values()))
    return reports


@dataclass
class RateResult:
    table: ResultTable
    fitted_slope: float
    intercept: float
    target_slope: float
    reports: dict = field(default_factory=dict)

    def as_summary(self):
        return {"fitted_slope": self.fitted_slope, "target_slope": self.target_slope}


def fit_loglog_slope(x, y):
    """
    Least-squares slope and intercept of log y against log x; nan when x is constant or fewer than two points
    remain.
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(y)
    if np.count_nonzero(keep) < 2 or np.ptp(np.log(x[keep])) == 0:
        return math.nan, math.nan
    fit = stats.linregress(np.log(x[keep]), np.log(y[keep]))
    return float(fit.slope), float(math.exp(fit.intercept))


def run_rate_experiment(cfg):
    """
    RMSE over a list of diffusivities with the bandwidth rule h = sigma^(2 / (1 + 2 beta)), and the log-log slope
    of RMSE against sigma.
    """
    if not cfg.nu_list or len(cfg.nu_list) < 3:
        raise ConfigError("The rate experiment needs at least 3 values in nu_list.")
    x0, beta = cfg.estimator.x0, cfg.estimator.beta
    table = ResultTable(CsvHeaders.Rate)
    reports = {}
    for nu in cfg.nu_list:
        model = cfg.model.with_nu(nu)
        grid = GridSpec.for_model(model, cfg.grid.n_space, cfg.grid.n_time)
        sigma = model.sigma
        h = select_bandwidth(sigma, beta, scale=cfg.bandwidth_scale)
        estimator = cfg.estimator.replace(nu_known=nu, sigma=sigma, h=h)
        logging.info("Rate experiment at nu=%s (sigma=%.5g, h=%.5g).", nu, sigma, h)
        runs = _estimates_over_x0(model, grid, estimator, [x0], cfg.n_runs, cfg.base_seed, cfg.workers,
                                  desc="Estimating at nu=%g." % nu)[0]
        report = mc_report(runs, true_value(model, x0), x0)
        reports[nu] = report
        table.append([nu, sigma, h, report.summary.rmse, cfg.n_runs - report.n_failed, report.n_failed])

    slope, intercept = fit_loglog_slope(table.column("sigma"), table.column("rmse"))
    if math.isnan(slope):
        logging.warning("Slope undefined: sigma does not vary across nu_list.")
    target = 2 * beta / (1 + 2 * beta)
    logging.info("Fitted slope %.3f against sigma (target %.3f, nu-exponent %.3f).", slope, target,
                 rate_exponent(cfg.model.noise, beta))
    table.write_csv(os.path.join(cfg.output_dir, OutputFiles.Rate))
    write_script(RATE_SCRIPT, os.path.join(cfg.output_dir, OutputFiles.RateScript), data=OutputFiles.Rate,
                 slope=slope, target=target, intercept=intercept)
    return RateResult(table, slope, intercept, target, reports)


@dataclass
class CoverageResult:
    coverage_rate: float
    n_ok: int
    n_failed: int
    report: MCReport

    def as_summary(self):
        return {"coverage_rate": self.coverage_rate, "n_ok": self.n_ok, "n_failed": self.n_failed}


def run_coverage_experiment(cfg):
    """
    Share of runs whose (1 - alpha_bar) confidence interval contains f(x0).
    """
    x0 = cfg.estimator.x0
    runs = _estimates_over_x0(cfg.model, cfg.grid, cfg.estimator, [x0], cfg.n_runs, cfg.base_seed, cfg.workers,
                              desc="Estimating confidence intervals.")[0]
    report = mc_report(runs, true_value(cfg.model, x0), x0)
    n_ok = cfg.n_runs - report.n_failed
    table = ResultTable(CsvHeaders.Coverage, [[x0, cfg.estimator.alpha_bar, report.summary.coverage_rate, n_ok,
                                               report.n_failed]])
    table.write_csv(os.path.join(cfg.output_dir, OutputFiles.Coverage))
    report.per_run.write_csv(os.path.join(cfg.output_dir, OutputFiles.Estimate))
    write_summary_stats(cfg.output_dir, "coverage", cfg.n_runs, report.n_failed)
    logging.info("Coverage at x0=%s: %.3f over %s runs.", x0, report.summary.coverage_rate, n_ok)
    return CoverageResult(report.summary.coverage_rate, n_ok, report.n_failed, report)


def growing_window_model(model, gamma, buffer):
    """
    Neumann interval with the window (-gamma/2, gamma/2) and a margin `buffer` on each side, at nu = sigma = 1.
    """
    half = gamma / 2
    domain = Domain(-half - buffer, half + buffer, Boundary.Neumann, -half, half)
    return ModelSpec(domain=domain, nu=1.0, noise=model.noise, reaction=model.reaction, horizon=model.horizon,
                     initial=model.initial, sigma_override=1.0)


def growing_window_grid(model, dx):
    n_space = max(3, int(round(model.domain.length / dx)) - 1)
    grid = GridSpec.for_model(model, n_space, 1)
    return GridSpec.for_model(model, n_space, max(1, math.ceil(model.horizon / grid.dx ** 2)))


@dataclass
class GrowingWindowResult:
    table: ResultTable
    reports: dict = field(default_factory=dict)

    def as_summary(self):
        return {"rmse": dict(zip(self.table.column("gamma"), self.table.column("rmse")))}


def run_growing_window_experiment(cfg):
    """
    RMSE of the estimator over increasing observation windows at fixed nu = sigma = 1, with h = gamma^(-1/(1+2beta)).
    Also reports the variance of the normalised spatial average (1/gamma) int K_plus_h, which is O(1/gamma).
    """
    if not cfg.gamma_list:
        raise ConfigError("The growing-window experiment needs a non-empty gamma_list.")
    x0, beta = cfg.estimator.x0, cfg.estimator.beta
    table = ResultTable(CsvHeaders.GrowingWindow)
    reports = {}
    for gamma in cfg.gamma_list:
        model = growing_window_model(cfg.model, gamma, cfg.buffer)
        grid = growing_window_grid(model, cfg.growing_dx)
        h = select_bandwidth(1.0, beta, gamma=gamma, scale=cfg.bandwidth_scale)
        estimator = cfg.estimator.replace(mode=EstimatorMode.GrowingWindow, gamma=gamma, h=h, nu_known=1.0, sigma=1.0)
        k_plus = localize(estimator.kernels.k_plus, h, x0)
        increments = NoiseIncrements(model.noise, grid, model.domain)

        def task(seed):
            traj = simulate(model, grid, seed, increments)
            average = spatial_average(traj, k_plus, grid.n_time) / gamma
            try:
                return estimate(traj, estimator), average
            except DegenerateWindowError as e:
                return RunFailure(seed - cfg.base_seed, str(e)), average

        logging.info("Growing window gamma=%s on %s cells, %s steps, h=%.5g.", gamma, grid.n_space, grid.n_time, h)
        results = run_monte_carlo(task, cfg.n_runs, cfg.base_seed, cfg.workers,
                                     desc="Estimating on window gamma=%g." % gamma)
        report = mc_report([r for r, _ in results], true_value(model, x0), x0)
        averages = np.array([a for _, a in results])
        reports[gamma] = report
        table.append([gamma, h, report.summary.rmse, float(np.var(averages, ddof=1)) if len(averages) > 1 else math.nan,
                      cfg.n_runs - report.n_failed, report.n_failed])
    table.write_csv(os.path.join(cfg.output_dir, OutputFiles.GrowingWindow))
    write_script(GROWING_WINDOW_SCRIPT, os.path.join(cfg.output_dir, OutputFiles.GrowingWindowScript),
                 data=OutputFiles.GrowingWindow)
    return GrowingWindowResult(table, reports)


def load_or_simulate(cfg):
    if cfg.trajectory:
        logging.info("Reading trajectory %s.", cfg.trajectory)
        return read_trajectory_binary(cfg.trajectory, cfg.model, cfg.base_seed)
    logging.info("Simulating trajectory with seed %s.", cfg.base_seed)
    return simulate(cfg.model, cfg.grid, cfg.base_seed)


def run_simulate(cfg):
    """
    Simulate and store one trajectory. Also writes the realisation table and script: one field per diffusivity in
    nu_list (else the configured nu), all from base_seed, with the cells within REALISATION_BAND of x0 marked.
    """
    traj = simulate(cfg.model, cfg.grid, cfg.base_seed)
    write_trajectory_csv(traj, os.path.join(cfg.output_dir, OutputFiles.TrajectoryCsv), cfg.csv_time_stride)
    write_trajectory_binary(traj, os.path.join(cfg.output_dir, OutputFiles.TrajectoryBin))

    trajectories = [traj]
    for nu in cfg.nu_list or []:
        if math.isclose(nu, cfg.model.nu):
            continue
        model = cfg.model.with_nu(nu)
        logging.info("Simulating realisation at nu=%s.", nu)
        trajectories.append(simulate(model, GridSpec.for_model(model, cfg.grid.n_space, cfg.grid.n_time),
                                     cfg.base_seed))
    trajectories.sort(key=lambda tr: -tr.model.nu)
    x0 = cfg.estimator.x0
    write_realisation_csv(trajectories, os.path.join(cfg.output_dir, OutputFiles.Realisation), x0, REALISATION_BAND,
                          cfg.csv_time_stride)
    write_realisation_script(os.path.join(cfg.output_dir, OutputFiles.RealisationScript), OutputFiles.Realisation,
                             [tr.model.nu for tr in trajectories], x0, REALISATION_BAND)
    return traj


def run_estimate(cfg):
    traj = load_or_simulate(cfg)
    report = estimate(traj, cfg.estimator, zeta=cfg.zeta)
    EstimateReportList([report]).write_csv(os.path.join(cfg.output_dir, OutputFiles.Estimate))
    summary = {"f_hat": report.f_hat, "std_error": report.std_error, "ci": [report.ci_low, report.ci_high]}
    if cfg.zeta is not None and report.std_error > 0:
        test = hypothesis_test(report, cfg.zeta, cfg.estimator.alpha_bar)
        summary.update(statistic=test.statistic, reject=test.reject)
        logging.info("Test of f(x0)=%s: statistic %.4f, %s.", cfg.zeta, test.statistic,
                     "rejected" if test.reject else "not rejected")
    if cfg.joint:
        joint = joint_estimate(traj, cfg.estimator, cfg.nu_bracket)
        summary.update(nu_hat=joint.nu_hat, joint_f_hat=joint.f_hat, flat=joint.flat)
        logging.info("Joint estimate: nu=%.6g, f(x0)=%.6g.", joint.nu_hat, joint.f_hat)
    logging.info("Estimate at x0=%s: %.6g +- %.6g.", report.x0, report.f_hat, report.std_error)
    return report, summary


def run_occupation(cfg):
    nu_list = cfg.nu_list or [cfg.model.nu]
    table = occupation_concentration(cfg.model, cfg.grid, cfg.a_low, cfg.a_high, cfg.t or cfg.model.horizon, nu_list,
                                     cfg.n_runs, cfg.base_seed, cfg.workers)
    table.write_csv(os.path.join(cfg.output_dir, OutputFiles.Occupation))
    return table


def run_variance_scan(cfg):
    """
    Variance scan over h_list with K_plus localised at x0. Without a configured p_max the constant is estimated
    from the density of the pooled window values at time t.
    """
    t = cfg.t or cfg.model.horizon
    h_list = cfg.h_list or [0.05, 0.1, 0.2]
    kernels = cfg.estimator.kernels or default_kernels()
    g_family = [(h, localize(kernels.k_plus, h, cfg.estimator.x0)) for h in h_list]
    table, window_values = variance_scan(cfg.model, cfg.grid, g_family, t, cfg.n_runs, cfg.base_seed, cfg.workers,
                                         p_max=cfg.p_max, return_values=True)
    table.write_csv(os.path.join(cfg.output_dir, OutputFiles.VarianceScan))
    if window_values.shape[0] >= 1000:
        middle = window_values.shape[1] // 2
        ensemble = EnsembleSlice(window_values, t, cfg.model, cfg.seeds, cfg.grid)
        write_histogram(density_diagnostic(ensemble, middle, cfg.n_bins),
                        os.path.join(cfg.output_dir, OutputFiles.Histogram))
    return table


def run_rescale_check(cfg):
    traj = simulate(cfg.model, cfg.grid, cfg.base_seed)
    report = rescale_check(traj, cfg.n_runs, cfg.workers)
    write_comparison(report, os.path.join(cfg.output_dir, OutputFiles.RescaleCheck))
    logging.info("Largest mean discrepancy %.4g (%.2f standard errors).", report.max_mean_discrepancy, report.max_z)
    return report
