import csv
import math
import os.path
import tempfile
import unittest

import numpy as np

from spdereact.collections import StatTable
from spdereact.config import build_config
from spdereact.constants import Boundary, OutputFiles
from spdereact.estimate import estimate
from spdereact.exceptions import ConfigError
from spdereact.harness import (fit_loglog_slope, growing_window_grid, growing_window_model, run_coverage_experiment,
                               run_estimate, run_figure_experiment, run_growing_window_experiment, run_occupation,
                               run_rate_experiment, run_rescale_check, run_simulate, run_variance_scan, summarize)


def tiny_config(out, workers=1, model=None, grid=None, estimator=None, **experiment):
    raw = {
        "model": dict({"nu": 0.01}, **(model or {})),
        "grid": dict({"n_space": 19, "n_time": 100}, **(grid or {})),
        "estimator": dict({"x0": 0.0, "h": 0.6}, **(estimator or {})),
        "experiment": dict({"n_runs": 4}, **experiment),
    }
    return build_config(raw, out=out, workers=workers)


def read_rows(fn):
    with open(fn, newline="") as f:
        return list(csv.reader(f))


class TestSummaries(unittest.TestCase):

    def test_summarize(self):
        summary = summarize([1.0, 2.0, 3.0, 4.0, 5.0], 3.0)
        self.assertEqual(summary.median, 3.0)
        self.assertEqual((summary.q25, summary.q75, summary.iqr), (2.0, 4.0, 2.0))
        self.assertAlmostEqual(summary.rmse, math.sqrt(2.0))
        self.assertTrue(math.isnan(summary.coverage_rate))

    def test_summarize_empty(self):
        summary = summarize([], 0.0)
        self.assertTrue(math.isnan(summary.median))
        self.assertTrue(math.isnan(summary.rmse))

    def test_fit_loglog_slope(self):
        x = np.array([0.1, 0.2, 0.4, 0.8])
        slope, intercept = fit_loglog_slope(x, 2.0 * x ** 0.8)
        self.assertAlmostEqual(slope, 0.8)
        self.assertAlmostEqual(intercept, 2.0)
        self.assertTrue(math.isnan(fit_loglog_slope([0.5, 0.5, 0.5], [1.0, 2.0, 3.0])[0]))
        self.assertTrue(math.isnan(fit_loglog_slope([0.1, 0.2], [1.0, math.nan])[0]))


class TestExperiments(unittest.TestCase):

    def setUp(self):
        self.tmpdir = tempfile.TemporaryDirectory()
        self.out = self.tmpdir.name

    def tearDown(self):
        self.tmpdir.cleanup()

    def subdir(self, name):
        path = os.path.join(self.out, name)
        os.makedirs(path)
        return path

    def test_figure(self):
        cfg = tiny_config(self.out, x0_grid=[-0.25, 0.0, 0.25])
        reports = run_figure_experiment(cfg)
        self.assertEqual(sorted(reports), [-0.25, 0.0, 0.25])
        for x0, report in reports.items():
            self.assertEqual(report.true_f, cfg.model.reaction(x0))
            self.assertEqual(len(report.per_run), 4)
        rows = read_rows(os.path.join(self.out, OutputFiles.FigureLeft))
        self.assertEqual(rows[0], ["x0", "median", "q05", "q95", "iqr", "true_f"])
        self.assertEqual(len(rows), 4)
        for fn in (OutputFiles.FigureRight, OutputFiles.FigureScript, OutputFiles.SummaryStats):
            self.assertTrue(os.path.exists(os.path.join(self.out, fn)))

    def test_figure_independent_of_workers(self):
        contents = []
        for workers in (1, 2):
            out = self.subdir("workers%s" % workers)
            run_figure_experiment(tiny_config(out, workers=workers, x0_grid=[-0.25, 0.25]))
            with open(os.path.join(out, OutputFiles.FigureLeft), "rb") as f:
                contents.append(f.read())
        self.assertEqual(contents[0], contents[1])

    def test_figure_needs_grid(self):
        with self.assertRaises(ConfigError):
            run_figure_experiment(tiny_config(self.out))

    def test_rate(self):
        cfg = tiny_config(self.out, grid={"n_space": 9, "n_time": 20}, nu_list=[0.04, 0.02, 0.01])
        result = run_rate_experiment(cfg)
        self.assertEqual(result.target_slope, 0.8)
        self.assertEqual(result.table.column("nu"), [0.04, 0.02, 0.01])
        np.testing.assert_allclose(result.table.column("sigma"), np.array([0.04, 0.02, 0.01]) ** 0.25)
        np.testing.assert_allclose(result.table.column("h"), np.array(result.table.column("sigma")) ** 0.4)
        self.assertTrue(os.path.exists(os.path.join(self.out, OutputFiles.Rate)))
        self.assertTrue(os.path.exists(os.path.join(self.out, OutputFiles.RateScript)))

    def test_rate_needs_three_diffusivities(self):
        with self.assertRaises(ConfigError):
            run_rate_experiment(tiny_config(self.out, nu_list=[0.04, 0.02]))

    def test_coverage(self):
        result = run_coverage_experiment(tiny_config(self.out, n_runs=5))
        self.assertEqual(result.n_ok + result.n_failed, 5)
        if result.n_ok:
            self.assertGreaterEqual(result.coverage_rate, 0.0)
            self.assertLessEqual(result.coverage_rate, 1.0)
        rows = read_rows(os.path.join(self.out, OutputFiles.Coverage))
        self.assertEqual(rows[0], ["x0", "alpha_bar", "coverage_rate", "n_ok", "n_failed"])
        self.assertEqual(len(read_rows(os.path.join(self.out, OutputFiles.Estimate))), 1 + result.n_ok)

    def test_growing_window_geometry(self):
        cfg = tiny_config(self.out)
        model = growing_window_model(cfg.model, 2.0, 1.0)
        self.assertEqual(model.domain.boundary, Boundary.Neumann)
        self.assertEqual((model.domain.left, model.domain.right), (-2.0, 2.0))
        self.assertEqual(model.domain.gamma_measure, 2.0)
        self.assertEqual((model.nu, model.sigma), (1.0, 1.0))
        grid = growing_window_grid(model, 0.5)
        self.assertEqual((grid.n_space, grid.n_time), (7, 4))
        self.assertAlmostEqual(grid.dx, 0.5)

    def test_growing_window(self):
        cfg = tiny_config(self.out, grid={"dx": 0.5}, gamma_list=[2.0, 2.0], buffer=1.0, n_runs=3)
        result = run_growing_window_experiment(cfg)
        self.assertEqual(len(result.table), 2)
        np.testing.assert_array_equal(np.array(result.table[0], dtype=float), np.array(result.table[1], dtype=float))
        self.assertAlmostEqual(result.table.column("h")[0], 2.0 ** -0.2)
        self.assertTrue(os.path.exists(os.path.join(self.out, OutputFiles.GrowingWindowScript)))

    def test_simulate_realisations(self):
        cfg = tiny_config(self.out, grid={"n_space": 9, "n_time": 20}, estimator={"x0": 0.0},
                          nu_list=[0.001, 0.1, 0.01])
        traj = run_simulate(cfg)
        rows = read_rows(os.path.join(self.out, OutputFiles.Realisation))
        self.assertEqual(rows[0], ["nu", "t", "y", "value", "near_x0"])
        self.assertEqual(len(rows), 1 + 3 * 21 * 9)
        self.assertEqual([float(r[0]) for r in rows[1::21 * 9]], [0.1, 0.01, 0.001])
        first = rows[1 + 21 * 9: 1 + 2 * 21 * 9]
        np.testing.assert_array_equal(np.array([float(r[3]) for r in first]), traj.values.ravel())
        for row in rows[1:]:
            self.assertEqual(row[4], "1" if abs(float(row[3])) <= 0.5 else "0")
        with open(os.path.join(self.out, OutputFiles.RealisationScript)) as f:
            script = f.read()
        self.assertIn('set output "figure2.png"', script)
        self.assertIn("set multiplot layout 1,4", script)
        self.assertIn("|X - 0| <= 0.5 at nu = 0.001", script)

    def test_estimate_on_stored_trajectory(self):
        cfg = tiny_config(self.out)
        traj = run_simulate(cfg)
        self.assertTrue(os.path.exists(os.path.join(self.out, OutputFiles.TrajectoryCsv)))
        stored = tiny_config(self.subdir("estimate"), estimator={"zeta": 0.0},
                             trajectory=os.path.join(self.out, OutputFiles.TrajectoryBin))
        report, summary = run_estimate(stored)
        self.assertAlmostEqual(report.f_hat, estimate(traj, cfg.estimator).f_hat, places=12)
        self.assertEqual(summary["f_hat"], report.f_hat)
        self.assertIn("statistic", summary)
        self.assertIn("reject", summary)
        rows = read_rows(os.path.join(stored.output_dir, OutputFiles.Estimate))
        self.assertEqual(len(rows), 2)

    def test_occupation(self):
        cfg = tiny_config(self.out, grid={"n_space": 9, "n_time": 20}, a_low=-10.0, a_high=10.0, nu_list=[0.04, 0.02],
                          n_runs=3)
        table = run_occupation(cfg)
        for nu in (0.04, 0.02):
            self.assertGreater(table.value("mu_hat", nu), 0.0)
            self.assertAlmostEqual(table.value("sd_ratio", nu), 0.0)
        self.assertEqual(len(read_rows(os.path.join(self.out, OutputFiles.Occupation))), 5)

    def test_variance_scan(self):
        cfg = tiny_config(self.out, grid={"n_space": 9, "n_time": 10}, n_runs=100, h_list=[0.5, 1.0])
        table = run_variance_scan(cfg)
        self.assertGreater(table.value("p_max_hat"), 0.0)
        stored = StatTable(csv_fn=os.path.join(self.out, OutputFiles.VarianceScan))
        self.assertEqual([r.stat for r in stored], [r.stat for r in table])
        self.assertAlmostEqual(stored.value("variance[h=0.5]"), table.value("variance[h=0.5]"))
        self.assertFalse(os.path.exists(os.path.join(self.out, OutputFiles.Histogram)))

    def test_rescale_check(self):
        cfg = tiny_config(self.out, model={"nu": 0.04}, grid={"n_space": 9, "n_time": 20}, n_runs=3)
        report = run_rescale_check(cfg)
        self.assertEqual(report.n_runs, 3)
        self.assertEqual(len(read_rows(os.path.join(self.out, OutputFiles.RescaleCheck))), 10)


if __name__ == '__main__':
    unittest.main()
