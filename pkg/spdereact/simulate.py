"""
Semi-implicit Euler scheme with finite differences for the stochastic heat equation

    dX = nu * Laplace(X) dt + f(X) dt + sigma * dW

on an interval with Dirichlet or Neumann conditions. The linear part is implicit, reaction and noise are
explicit, and noise increments are drawn before the implicit solve of each step.

The grid holds the interior points left + k dx, k = 1, ..., n_space. Neumann conditions copy the edge cell into
the ghost, which puts the reflecting wall half a cell inside the domain, at left + dx/2 and right - dx/2. The
cosine modes of the spectral noise keep their walls at left and right; the two differ by O(dx).
"""
import csv
import logging
import math

import numpy as np
from scipy import linalg

from .constants import Boundary, COVARIANCE_JITTER, CsvHeaders, NoiseKind, RESCALE_SEED_OFFSET
from .exceptions import BlowUpError, ConfigError, IllConditionedCovarianceError, SingularSystemError
from .models import ComparisonReport, Domain, GridSpec, ModelSpec, Trajectory
from .pipeline import run_monte_carlo
from .problem import RescaledInitial


def implicit_matrix_banded(n_space, ratio, boundary):
    """
    Upper banded storage of I - ratio * L, with L the unscaled second-difference matrix and ratio = nu dt / dx^2.
    Ghost values are 0 beyond Dirichlet boundaries and copies of the edge cell beyond Neumann ones.
    """
    ab = np.empty((2, n_space))
    ab[0, 0] = 0.0
    ab[0, 1:] = -ratio
    ab[1, :] = 1 + 2 * ratio
    if boundary is Boundary.Neumann:
        ab[1, 0] = ab[1, -1] = 1 + ratio
    return ab


def implicit_factor(model, grid):
    ratio = model.nu * grid.dt / grid.dx ** 2
    ab = implicit_matrix_banded(grid.n_space, ratio, model.domain.boundary)
    try:
        return linalg.cholesky_banded(ab, lower=False)
    except linalg.LinAlgError as e:
        raise SingularSystemError("Implicit system is not positive definite: %s" % e)


def riesz_covariance(rho, n_space, dx):
    """
    Cell covariance [chi(y_j - y_k) dx] of the Riesz kernel chi(x) = |x|^-rho, with the singular diagonal
    replaced by chi(dx / 2).
    """
    lags = dx * np.abs(np.subtract.outer(np.arange(n_space), np.arange(n_space)))
    lags[np.diag_indices(n_space)] = dx / 2
    return lags ** (-rho) * dx


def riesz_factor(rho, n_space, dx):
    cov = riesz_covariance(rho, n_space, dx)
    try:
        return linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError:
        jitter = COVARIANCE_JITTER * np.trace(cov) / n_space
        logging.warning("Riesz covariance not positive definite, adding jitter %s to the diagonal.", jitter)
    try:
        return linalg.cholesky(cov + jitter * np.eye(n_space), lower=True)
    except linalg.LinAlgError as e:
        raise IllConditionedCovarianceError("Riesz covariance with rho=%s stays singular after jitter: %s" % (rho, e))


def spectral_basis(domain, y, n_modes):
    """
    Orthonormal eigenfunctions of the Laplacian on the domain evaluated at y, one mode per column. Dirichlet
    gives sines k = 1, ..., n_modes; Neumann gives the constant mode followed by cosines k = 1, ..., n_modes - 1.
    """
    s = (np.asarray(y) - domain.left) / domain.length
    if domain.boundary is Boundary.Dirichlet:
        k = np.arange(1, n_modes + 1)
        return math.sqrt(2 / domain.length) * np.sin(np.pi * np.outer(s, k))
    k = np.arange(n_modes)
    basis = math.sqrt(2 / domain.length) * np.cos(np.pi * np.outer(s, k))
    basis[:, 0] = 1 / math.sqrt(domain.length)
    return basis


def spectral_amplitudes(noise, n_modes, boundary):
    if noise.amplitudes is not None:
        return np.asarray(noise.amplitudes, dtype=float)
    if boundary is Boundary.Dirichlet:
        return np.arange(1, n_modes + 1, dtype=float) ** (-noise.rho2)
    amplitudes = np.ones(n_modes)
    amplitudes[1:] = np.arange(1, n_modes, dtype=float) ** (-noise.rho2)
    return amplitudes


def default_domain(grid):
    length = grid.dx * (grid.n_space + 1)
    return Domain(0.0, length, Boundary.Dirichlet, grid.dx / 2, length - grid.dx / 2)


class NoiseIncrements:
    """
    Sampler of discrete noise increments Delta W for one grid, with covariance factors computed once.
    """

    def __init__(self, noise, grid, domain=None):
        self.noise = noise
        self.grid = grid
        self.domain = domain or default_domain(grid)
        y = grid.points(self.domain)
        self.dispersion = noise.dispersion(y)
        self.cell_sd = math.sqrt(grid.dt / grid.dx)
        if noise.kind is NoiseKind.Riesz:
            self.factor = riesz_factor(noise.rho, grid.n_space, grid.dx)
        elif noise.kind is NoiseKind.Spectral:
            n_modes = len(noise.amplitudes) if noise.amplitudes is not None else grid.n_space
            self.amplitudes = spectral_amplitudes(noise, n_modes, self.domain.boundary)
            self.basis = spectral_basis(self.domain, y, n_modes) * self.amplitudes

    def draw(self, rng):
        if self.noise.kind is NoiseKind.White:
            increment = self.cell_sd * rng.standard_normal(self.grid.n_space)
        elif self.noise.kind is NoiseKind.Riesz:
            increment = self.factor @ (self.cell_sd * rng.standard_normal(self.grid.n_space))
        else:
            increment = self.basis @ (math.sqrt(self.grid.dt) * rng.standard_normal(self.basis.shape[1]))
        return self.dispersion * increment


def noise_increment(noise, grid, rng, domain=None):
    return NoiseIncrements(noise, grid, domain).draw(rng)


def simulate(model, grid, seed, increments=None):
    """
    Integrate one trajectory. Identical (model, grid, seed) give bit-identical values.
    """
    grid.check_consistent(model)
    rng = np.random.default_rng(seed)
    y = grid.points(model.domain)
    sigma = model.sigma
    if sigma > 0 and increments is None:
        increments = NoiseIncrements(model.noise, grid, model.domain)
    factor = implicit_factor(model, grid)

    values = np.empty((grid.n_time + 1, grid.n_space))
    values[0] = model.initial_values(y)
    for i in range(grid.n_time):
        rhs = values[i] + grid.dt * np.asarray(model.reaction(values[i]), dtype=float)
        if sigma > 0:
            rhs += sigma * increments.draw(rng)
        values[i + 1] = linalg.cho_solve_banded((factor, False), rhs, check_finite=False)
        if not np.all(np.isfinite(values[i + 1])):
            raise BlowUpError("Non-finite value at step %s (t=%s) for seed %s." % (i + 1, (i + 1) * grid.dt, seed))
    return Trajectory(values, grid, model, seed)


def linear_variance_exact(nu, sigma, t, y, n_modes=10000):
    """
    Variance of the free (f = 0) white-noise equation on the unit interval with Dirichlet conditions and
    zero initial condition, from its truncated eigen-expansion.
    """
    k = np.arange(1, n_modes + 1, dtype=float)
    rate = 2 * nu * np.pi ** 2 * k ** 2
    terms = 2 * np.sin(k * np.pi * y) ** 2 * -np.expm1(-rate * t) / rate
    return float(sigma ** 2 * terms.sum())


def rescaled_model(model):
    """
    Unit-diffusivity equation on nu^(-1/2) Lambda whose solution is equal in law to y -> X_t(nu^(1/2) y).
    """
    scale = math.sqrt(model.nu)
    initial = RescaledInitial(model.initial, scale) if model.initial is not None else None
    return ModelSpec(domain=model.domain.scaled(1 / scale), nu=1.0, noise=model.noise, reaction=model.reaction,
                     horizon=model.horizon, initial=initial, sigma_override=model.nu ** (-0.25) * model.sigma)


def rescale_check(traj, n_runs=100, workers=1):
    """
    Compare final-time moments of the field at rescaled locations against independent runs of the rescaled
    equation. Both grids have the same number of interior points, so the k-th point of one maps exactly onto
    the k-th point of the other.
    """
    model, grid = traj.model, traj.grid
    if model.noise.kind is not NoiseKind.White or model.domain.boundary is not Boundary.Dirichlet:
        raise ConfigError("Rescaling check requires white noise and Dirichlet conditions.")
    y_model = rescaled_model(model)
    y_grid = GridSpec.for_model(y_model, grid.n_space, grid.n_time)

    x_increments = NoiseIncrements(model.noise, grid, model.domain)
    y_increments = NoiseIncrements(y_model.noise, y_grid, y_model.domain)

    def final_x(seed):
        return simulate(model, grid, seed, x_increments).values[-1]

    def final_y(seed):
        return simulate(y_model, y_grid, seed, y_increments).values[-1]

    logging.info("Comparing %s runs at nu=%s against the rescaled equation.", n_runs, model.nu)
    x_final = run_monte_carlo(final_x, n_runs, traj.seed, workers, desc="Simulating original equation.")
    y_final = run_monte_carlo(final_y, n_runs, traj.seed + RESCALE_SEED_OFFSET, workers,
                                 desc="Simulating rescaled equation.")
    x_final, y_final = np.array(x_final), np.array(y_final)

    ddof = 1 if n_runs > 1 else 0
    mean_stderr = np.sqrt((x_final.var(axis=0, ddof=ddof) + y_final.var(axis=0, ddof=ddof)) / n_runs)
    if n_runs == 1:
        mean_stderr = np.full(grid.n_space, np.nan)
    return ComparisonReport(
        points=traj.y,
        mean_discrepancy=x_final.mean(axis=0) - y_final.mean(axis=0),
        second_moment_discrepancy=(x_final ** 2).mean(axis=0) - (y_final ** 2).mean(axis=0),
        mean_stderr=mean_stderr,
        n_runs=n_runs,
    )


def write_trajectory_csv(traj, path, time_stride=1):
    y, t = traj.y, traj.t
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CsvHeaders.Trajectory)
        for i in range(0, traj.grid.n_time + 1, time_stride):
            writer.writerows(zip(np.full(len(y), t[i]), y, traj.values[i]))


def near_level(traj, x0, band):
    """
    Space-time cells where |X_t(y) - x0| <= band, the points that carry weight in an estimate at x0 with h = band.
    """
    return np.abs(traj.values - x0) <= band


def write_realisation_csv(trajectories, path, x0, band, time_stride=1):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CsvHeaders.Realisation)
        for traj in trajectories:
            y, t = traj.y, traj.t
            near = near_level(traj, x0, band).astype(int)
            for i in range(0, traj.grid.n_time + 1, time_stride):
                writer.writerows(zip(np.full(len(y), traj.model.nu), np.full(len(y), t[i]), y, traj.values[i],
                                     near[i]))


def write_trajectory_binary(traj, path):
    """
    Two little-endian int64 (n_time + 1, n_space) followed by the values as row-major little-endian float64.
    """
    with open(path, "wb") as f:
        f.write(np.array(traj.values.shape, dtype="<i8").tobytes())
        f.write(np.ascontiguousarray(traj.values, dtype="<f8").tobytes())


def read_trajectory_binary(path, model, seed=0):
    with open(path, "rb") as f:
        shape = np.frombuffer(f.read(16), dtype="<i8")
        if shape.size != 2:
            raise ConfigError("Trajectory file %s is truncated." % path)
        n_rows, n_space = int(shape[0]), int(shape[1])
        values = np.frombuffer(f.read(), dtype="<f8")
    if values.size != n_rows * n_space:
        raise ConfigError("Trajectory file %s holds %s values, expected %s." % (path, values.size, n_rows * n_space))
    grid = GridSpec.for_model(model, n_space, n_rows - 1)
    return Trajectory(values.reshape(n_rows, n_space), grid, model, seed)
