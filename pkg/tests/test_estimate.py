import math
import unittest

import numpy as np
from scipy import integrate

from spdereact.constants import Boundary, EstimatorMode
from spdereact.estimate import (ObservedField, WlsObjective, compute_weights, default_kernels, discrete_generator,
                                estimate, estimate_curve, hypothesis_test, joint_estimate, localize, normal_quantile,
                                random_kernel, select_bandwidth, wls_objective)
from spdereact.exceptions import BracketError, DegenerateWindowError
from spdereact.models import (Domain, EstimateReport, EstimatorConfig, GridSpec, ModelSpec, NoiseSpec, Trajectory,
                              Weights)
from spdereact.problem import ALLEN_CAHN, reaction_from_name
from spdereact.simulate import simulate

DIRICHLET = Domain(0.0, 1.0, Boundary.Dirichlet, 0.1, 0.9)
NEUMANN = Domain(0.0, 1.0, Boundary.Neumann, 0.0, 1.0)


def field_trajectory(fn, domain=DIRICHLET, nu=0.01, n_space=49, n_time=50):
    """
    Trajectory with values[i, k] = fn(t_i, y_k) on a noiseless model.
    """
    model = ModelSpec(domain, nu, NoiseSpec.white(), reaction_from_name("zero"), sigma_override=0.0)
    grid = GridSpec.for_model(model, n_space, n_time)
    t, y = np.meshgrid(grid.times(), grid.points(domain), indexing="ij")
    return Trajectory(fn(t, y), grid, model)


def random_trajectory(rng, n_space=9, n_time=20):
    model = ModelSpec(DIRICHLET, 0.01, NoiseSpec.white(), ALLEN_CAHN)
    grid = GridSpec.for_model(model, n_space, n_time)
    return Trajectory(rng.standard_normal((n_time + 1, n_space)), grid, model)


class TestKernels(unittest.TestCase):

    def setUp(self):
        self.kernels = default_kernels()

    def test_tents(self):
        self.assertEqual(self.kernels.k_minus(-0.5), 1)
        self.assertEqual(self.kernels.k_plus(0.0), 0)
        self.assertEqual(self.kernels.k_plus(1.0), 0)
        x = np.linspace(0, 1, 1001)
        self.assertAlmostEqual(integrate.trapezoid(self.kernels.k_plus(x), x), 0.5)

    def test_localize(self):
        g = localize(self.kernels.k_plus, 1.0, 0.0)
        x = np.linspace(-2, 2, 9)
        np.testing.assert_array_equal(g(x), self.kernels.k_plus(x))
        g = localize(self.kernels.k_plus, 0.1, 1.0)
        np.testing.assert_allclose(g.support, (1.0, 1.1))
        x = np.linspace(1.0, 1.1, 1001)
        self.assertAlmostEqual(integrate.trapezoid(g(x), x), 0.05)
        with self.assertRaises(ValueError):
            localize(self.kernels.k_plus, 0.0, 1.0)

    def test_random_kernel_scaling_invariance(self):
        weights = Weights(t_m1=0.3, t_p1=0.5, t_m2=0.2, t_p2=0.7, i_m=0.1, i_p=0.1)
        a, b = 2.0, 5.0
        scaled = Weights(t_m1=a * 0.3, t_p1=b * 0.5, t_m2=a * 0.2, t_p2=b * 0.7, i_m=a * a * 0.1, i_p=b * b * 0.1)
        x = np.linspace(-1.5, 1.5, 31)
        np.testing.assert_allclose(random_kernel(weights, self.kernels, 1.0, 0.0)(x),
                                   random_kernel(scaled, self.kernels.scaled(a, b), 1.0, 0.0)(x), rtol=1e-12)

    def test_one_sided_weights(self):
        weights = Weights(t_m1=1.0, t_p1=1.0, t_m2=1.0, t_p2=0.0, i_m=0.0, i_p=0.0)
        x = np.linspace(-1, 1, 21)
        np.testing.assert_allclose(random_kernel(weights, self.kernels, 0.5, 0.0)(x),
                                   localize(self.kernels.k_plus, 0.5, 0.0)(x))

    def test_degenerate(self):
        with self.assertRaises(DegenerateWindowError):
            random_kernel(Weights(0.0, 1.0, 0.0, 1.0, 0.0, 0.0), self.kernels, 1.0, 0.0)


class TestWeights(unittest.TestCase):

    def setUp(self):
        self.kernels = default_kernels()

    def test_hand_example(self):
        traj = field_trajectory(lambda t, y: np.broadcast_to([0.25, 0.5, 0.75], t.shape), NEUMANN, n_space=3,
                                n_time=1)
        cfg = EstimatorConfig(x0=0.5, h=0.5, kernels=self.kernels)
        weights = compute_weights(traj, cfg)
        cell = traj.grid.dt * traj.grid.dx
        self.assertAlmostEqual(weights.t_p1, cell)
        self.assertAlmostEqual(weights.t_m1, cell)
        self.assertAlmostEqual(weights.t_p2, cell * 0.25)
        self.assertAlmostEqual(weights.t_m2, cell * 0.25)
        self.assertAlmostEqual(weights.i_p, cell)
        self.assertAlmostEqual(weights.j, weights.t_m1 * weights.t_p2 + weights.t_p1 * weights.t_m2)

    def test_empty_window(self):
        traj = field_trajectory(lambda t, y: 10 + 0 * t * y)
        cfg = EstimatorConfig(x0=0.0, h=1.0, kernels=self.kernels)
        weights = compute_weights(traj, cfg)
        self.assertEqual(weights.as_row(), [0.0] * 7)
        with self.assertRaises(DegenerateWindowError):
            estimate(traj, cfg)

    def test_discrete_identities(self):
        rng = np.random.default_rng(0)
        cfg = EstimatorConfig(x0=0.0, h=1.0, kernels=self.kernels)
        for _ in range(100):
            traj = random_trajectory(rng)
            field = ObservedField(traj)
            weights = compute_weights(traj, cfg)
            k_hat = random_kernel(weights, self.kernels, cfg.h, cfg.x0)(field.x)
            self.assertTrue(np.all(k_hat >= 0))
            self.assertLessEqual(abs(field.cell_measure * k_hat.sum() - 1), 1e-12)
            self.assertLessEqual(abs(field.cell_measure * (k_hat * (field.x - cfg.x0)).sum()), 1e-12)


class TestDiscreteGenerator(unittest.TestCase):

    def test_quadratic(self):
        domain = Domain(0.0, 2.0, Boundary.Dirichlet, 0.1, 1.9)
        traj = field_trajectory(lambda t, y: y ** 2, domain, n_space=7, n_time=1)
        for k in range(1, 6):
            self.assertAlmostEqual(discrete_generator(traj, 0, k), 2.0, places=12)

    def test_affine_and_constant(self):
        for fn in (lambda t, y: 3 + 0 * y, lambda t, y: 2 * y - 1):
            traj = field_trajectory(fn, n_space=9, n_time=1)
            for k in range(1, 8):
                self.assertAlmostEqual(discrete_generator(traj, 1, k), 0.0, places=9)

    def test_edge_ghosts(self):
        dirichlet = field_trajectory(lambda t, y: 1 + 0 * y, n_space=9, n_time=1)
        self.assertAlmostEqual(discrete_generator(dirichlet, 0, 0), -1 / dirichlet.grid.dx ** 2)
        neumann = field_trajectory(lambda t, y: 1 + 0 * y, NEUMANN, n_space=9, n_time=1)
        self.assertEqual(discrete_generator(neumann, 0, 8), 0.0)

    def test_out_of_range(self):
        traj = field_trajectory(lambda t, y: y, n_space=9, n_time=1)
        for i, k in ((0, 9), (0, -1), (2, 0)):
            with self.assertRaises(IndexError):
                discrete_generator(traj, i, k)


class TestEstimate(unittest.TestCase):

    def setUp(self):
        self.kernels = default_kernels()
        self.c = 0.2
        self.linear = field_trajectory(lambda t, y: y + self.c * t)
        self.cfg = EstimatorConfig(x0=0.5, h=0.3, kernels=self.kernels, nu_known=0.01, sigma=0.0)

    def test_exact_recovery(self):
        report = estimate(self.linear, self.cfg)
        self.assertLessEqual(abs(report.f_hat - self.c), 1e-10 * self.c)
        self.assertEqual(report.std_error, 0.0)
        self.assertGreater(report.n_window_points, 0)

    def test_kernel_rescaling_invariance(self):
        traj = random_trajectory(np.random.default_rng(1))
        cfg = EstimatorConfig(x0=0.0, h=1.0, kernels=self.kernels, nu_known=0.01, sigma=0.5)
        report = estimate(traj, cfg)
        scaled = estimate(traj, cfg.replace(kernels=self.kernels.scaled(3.0, 0.25)))
        for field in ("f_hat", "std_error", "ci_low", "ci_high"):
            self.assertAlmostEqual(getattr(scaled, field) / getattr(report, field), 1.0, places=10)
        self.assertAlmostEqual(estimate(self.linear, self.cfg.replace(kernels=self.kernels.scaled(2.0, 7.0))).f_hat,
                               self.c, places=12)

    def test_confidence_interval(self):
        self.assertAlmostEqual(normal_quantile(0.05), 1.959964, places=6)
        self.assertAlmostEqual(1.0 - normal_quantile(0.05) * 0.1, 0.8040, places=4)
        self.assertAlmostEqual(1.0 + normal_quantile(0.05) * 0.1, 1.1960, places=4)
        traj = random_trajectory(np.random.default_rng(2))
        cfg = EstimatorConfig(x0=0.0, h=1.0, kernels=self.kernels, sigma=0.5)
        report = estimate(traj, cfg)
        self.assertAlmostEqual(report.ci_high - report.f_hat, normal_quantile(0.05) * report.std_error)
        narrow = estimate(traj, cfg.replace(alpha_bar=0.1))
        wide = estimate(traj, cfg.replace(alpha_bar=0.01))
        self.assertLess(narrow.ci_high - narrow.ci_low, wide.ci_high - wide.ci_low)

    def test_standard_error(self):
        traj = random_trajectory(np.random.default_rng(3))
        cfg = EstimatorConfig(x0=0.0, h=1.0, kernels=self.kernels, sigma=0.5)
        report = estimate(traj, cfg)
        w = report.weights
        self.assertAlmostEqual(report.std_error, 0.5 * math.sqrt(w.t_p2 ** 2 * w.i_m + w.t_m2 ** 2 * w.i_p) / w.j)

    def test_growing_window_uses_unit_sigma(self):
        traj = random_trajectory(np.random.default_rng(4))
        unit = estimate(traj, EstimatorConfig(x0=0.0, h=1.0, kernels=self.kernels, sigma=1.0, nu_known=1.0))
        growing = estimate(traj, EstimatorConfig(x0=0.0, h=1.0, kernels=self.kernels, sigma=0.2, nu_known=0.01,
                                                 mode=EstimatorMode.GrowingWindow, gamma=0.8))
        self.assertAlmostEqual(growing.std_error, unit.std_error)
        self.assertAlmostEqual(growing.f_hat, unit.f_hat)

    def test_simulated_trajectory(self):
        model = ModelSpec(DIRICHLET, 0.01, NoiseSpec.white(), ALLEN_CAHN)
        traj = simulate(model, GridSpec.for_model(model, 19, 100), seed=0)
        report = estimate(traj, EstimatorConfig(x0=0.0, h=1.0, kernels=self.kernels, sigma=model.sigma,
                                                nu_known=model.nu), zeta=0.0)
        self.assertTrue(report.ci_low <= report.f_hat <= report.ci_high)
        self.assertAlmostEqual(report.test_statistic, report.f_hat / report.std_error)

    def test_estimate_curve_skips_empty_windows(self):
        traj = random_trajectory(np.random.default_rng(5))
        cfg = EstimatorConfig(x0=0.0, h=1.0, kernels=self.kernels, sigma=0.5)
        with self.assertLogs(level="WARNING"):
            reports = estimate_curve(traj, cfg, [0.0, 100.0])
        self.assertEqual([r.x0 for r in reports], [0.0])

    def test_estimate_curve_matches_pointwise_estimates(self):
        traj = random_trajectory(np.random.default_rng(6))
        cfg = EstimatorConfig(x0=0.0, h=1.0, kernels=self.kernels, sigma=0.5)
        reports = estimate_curve(traj, cfg, [-0.5, 100.0, 0.5], on_degenerate=lambda x0, e: (x0, str(e)))
        self.assertEqual(reports[1][0], 100.0)
        for x0, report in ((-0.5, reports[0]), (0.5, reports[2])):
            self.assertEqual(report.f_hat, estimate(traj, cfg.replace(x0=x0)).f_hat)



class TestHypothesisTest(unittest.TestCase):

    def report(self, f_hat, std_error):
        return EstimateReport(x0=0.0, h=1.0, f_hat=f_hat, std_error=std_error, ci_low=f_hat - 2 * std_error,
                              ci_high=f_hat + 2 * std_error, weights=Weights(1, 1, 1, 1, 1, 1), n_window_points=1)

    def test_examples(self):
        result = hypothesis_test(self.report(1.0, 0.1), 1.0)
        self.assertEqual(result.statistic, 0.0)
        self.assertFalse(result.reject)
        result = hypothesis_test(self.report(8.5, 0.2), 8.0, 0.05)
        self.assertAlmostEqual(result.statistic, 2.5)
        self.assertTrue(result.reject)
        self.assertFalse(hypothesis_test(self.report(8.5, 0.2), 8.0, 0.01).reject)

    def test_zero_standard_error(self):
        with self.assertRaises(ValueError):
            hypothesis_test(self.report(1.0, 0.0), 0.0)


class TestBandwidth(unittest.TestCase):

    def test_examples(self):
        self.assertEqual(select_bandwidth(1.0, 1.5), 1.0)
        self.assertAlmostEqual(select_bandwidth(0.1, 1.0), 0.21544, places=5)
        self.assertAlmostEqual(select_bandwidth(0.17783, 2.0), 0.50119, places=5)
        self.assertAlmostEqual(select_bandwidth(1.0, 2.0, gamma=32.0), 0.5)
        self.assertAlmostEqual(select_bandwidth(0.1, 1.0, scale=2.0), 2 * 0.1 ** (2 / 3))

    def test_bias_variance_balance(self):
        for sigma, beta in ((0.3, 1.0), (0.05, 2.0), (0.7, 1.5)):
            h = select_bandwidth(sigma, beta)
            self.assertAlmostEqual(h ** beta, sigma * h ** -0.5)

    def test_invalid(self):
        with self.assertRaises(ValueError):
            select_bandwidth(0.1, 3.0)
        with self.assertRaises(ValueError):
            select_bandwidth(0.0, 2.0)
        with self.assertRaises(ValueError):
            select_bandwidth(1.0, 2.0, gamma=-1.0)


class TestJointEstimate(unittest.TestCase):

    def setUp(self):
        self.nu0 = 0.01
        rate = 4 * np.pi ** 2 * self.nu0
        self.traj = field_trajectory(lambda t, y: 0.5 * np.sin(2 * np.pi * y) * np.exp(-rate * t), n_time=100)
        self.cfg = EstimatorConfig(x0=0.0, h=1.0, kernels=default_kernels(), nu_known=self.nu0, sigma=0.0)

    def test_objective_minimal_near_true_diffusivity(self):
        objective = WlsObjective(self.traj, self.cfg)
        self.assertLess(objective(self.nu0), objective(0.5 * self.nu0))
        self.assertLess(objective(self.nu0), objective(2 * self.nu0))
        self.assertEqual(wls_objective(self.traj, self.cfg, self.nu0), objective(self.nu0))

    def test_joint_estimate(self):
        result = joint_estimate(self.traj, self.cfg, (1e-4, 1.0))
        self.assertFalse(result.flat)
        self.assertAlmostEqual(result.nu_hat / self.nu0, 1.0, delta=0.05)
        self.assertAlmostEqual(result.f_hat, 0.0, delta=1e-3)

    def test_bracket_without_minimum(self):
        with self.assertRaises(BracketError):
            joint_estimate(self.traj, self.cfg, (0.5, 1.0))
        with self.assertRaises(BracketError):
            joint_estimate(self.traj, self.cfg, (1.0, 0.5))

    def test_flat_objective(self):
        traj = field_trajectory(lambda t, y: y + 0.2 * t)
        cfg = EstimatorConfig(x0=0.5, h=0.3, kernels=default_kernels(), nu_known=0.01, sigma=0.0)
        with self.assertLogs(level="WARNING"):
            result = joint_estimate(traj, cfg, (1e-4, 1.0))
        self.assertTrue(result.flat)
        self.assertAlmostEqual(result.nu_hat, (1e-4 + 1.0) / 2)
        self.assertAlmostEqual(result.f_hat, 0.2, places=9)


if __name__ == '__main__':
    unittest.main()
