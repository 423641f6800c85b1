import json
import os
import os.path
from sys import platform
import tempfile
import unittest
from unittest.mock import patch

from spdereact import _main, main, prepare_argparser
from spdereact.constants import OutputFiles
from spdereact.exceptions import BlowUpError

TINY_CONFIG = """\
[model]
nu = 0.04

[grid]
n_space = 9
n_time = 10

[estimator]
x0 = 0.0
h = 0.6

[experiment]
n_runs = 2
"""


class TestEntryPoint(unittest.TestCase):

    def test_main(self):
        with patch('spdereact._main') as mock_main:
            with patch('spdereact.prepare_argparser') as mock_argparser:
                with patch('spdereact.utils.limit_memory') as mock_limit_memory:
                    main()
                    self.assertEqual(mock_main.call_count, 1)
                    self.assertEqual(mock_argparser.call_count, 1)
                    if platform == "darwin":
                        self.assertEqual(mock_limit_memory.call_count, 0)
                    else:
                        self.assertEqual(mock_limit_memory.call_count, 1)


class TestArgParser(unittest.TestCase):

    def test_subcommands(self):
        args = prepare_argparser().parse_args(["rate", "--seed", "3", "--runs", "10", "--workers", "2"])
        self.assertEqual((args.subcommand, args.seed, args.runs, args.workers), ("rate", 3, 10, 2))
        self.assertIsNone(args.config)

    def test_usage_errors(self):
        for argv in (["fly"], [], ["simulate", "--runs", "many"]):
            with patch("sys.stderr"):
                with self.assertRaises(SystemExit) as cm:
                    prepare_argparser().parse_args(argv)
            self.assertEqual(cm.exception.code, 1)

    def test_version(self):
        with patch("sys.stdout"):
            with self.assertRaises(SystemExit) as cm:
                prepare_argparser().parse_args(["--version"])
        self.assertEqual(cm.exception.code, 0)


class TestPipeline(unittest.TestCase):

    def setUp(self):
        self.tmpdir = tempfile.TemporaryDirectory()
        self.out = os.path.join(self.tmpdir.name, "out")
        self.config = os.path.join(self.tmpdir.name, "config.toml")
        with open(self.config, "w") as f:
            f.write(TINY_CONFIG)

    def tearDown(self):
        self.tmpdir.cleanup()

    def run_main(self, *argv):
        args = prepare_argparser().parse_args(list(argv))
        with self.assertRaises(SystemExit) as cm:
            _main(args)
        return cm.exception.code

    def test_simulate(self):
        self.assertEqual(self.run_main("simulate", "--config", self.config, "--out", self.out, "--workers", "1"), 0)
        outputs = [OutputFiles.TrajectoryCsv, OutputFiles.TrajectoryBin, OutputFiles.Realisation,
                   OutputFiles.RealisationScript]
        for fn in outputs + [OutputFiles.Manifest]:
            self.assertTrue(os.path.exists(os.path.join(self.out, fn)))
        self.assertTrue(os.path.exists(os.path.join(self.out, ".log", "spdereact_debug.log")))
        with open(os.path.join(self.out, OutputFiles.Manifest)) as f:
            manifest = json.load(f)
        self.assertEqual(manifest["subcommand"], "simulate")
        self.assertEqual(manifest["outputs"], sorted(outputs))
        self.assertEqual(manifest["seeds"]["base_seed"], 0)
        self.assertEqual(manifest["config"]["experiment"]["output_dir"], self.out)

    def test_missing_config(self):
        missing = os.path.join(self.tmpdir.name, "absent.toml")
        self.assertEqual(self.run_main("simulate", "--config", missing, "--out", self.out), 1)

    def test_missing_experiment_list(self):
        self.assertEqual(self.run_main("figure", "--config", self.config, "--out", self.out, "--workers", "1"), 1)

    def test_numerical_failure(self):
        with patch("spdereact.harness.run_simulate", side_effect=BlowUpError("Field left the finite range.")):
            self.assertEqual(self.run_main("simulate", "--config", self.config, "--out", self.out, "--workers", "1"),
                             2)
        self.assertFalse(os.path.exists(os.path.join(self.out, OutputFiles.Manifest)))

    def test_interrupt(self):
        with patch("spdereact.harness.run_simulate", side_effect=KeyboardInterrupt):
            self.assertEqual(self.run_main("simulate", "--config", self.config, "--out", self.out, "--workers", "1"),
                             130)


if __name__ == '__main__':
    unittest.main()
