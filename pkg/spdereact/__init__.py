import os
import os.path
from sys import platform

if platform == "darwin":
    import multiprocessing
    multiprocessing.set_start_method("fork")

SUBCOMMANDS = ("simulate", "estimate", "figure", "rate", "coverage", "occupation", "variance-scan", "growing-window",
               "rescale-check")


def prepare_argparser():
    import argparse
    from importlib.metadata import PackageNotFoundError, version

    from .utils import CustomArgumentParser

    try:
        package_version = version(__package__)
    except PackageNotFoundError:
        package_version = "unknown"

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help="experiment configuration in TOML format. Defaults apply to missing keys")
    common.add_argument('--seed', type=int, help="base seed; run r uses seed + r. Overrides [experiment] base_seed")
    common.add_argument('--runs', type=int, help="number of Monte-Carlo runs. Overrides [experiment] n_runs")
    common.add_argument('--out', help="output directory. Overrides [experiment] output_dir")
    common.add_argument('--workers', type=int,
                        help="how many worker processes to use. Falls back to $SPDE_REACT_WORKERS, then to the "
                             "config, then to 1")

    parser = CustomArgumentParser(
        formatter_class=argparse.RawDescriptionHelpFormatter,
        description=r"""
        Simulate semi-linear stochastic heat equations on an interval and
        estimate their reaction function pointwise from a single space-time
        field, with confidence intervals, spatial-ergodicity statistics and
        Monte-Carlo experiments writing CSV tables and gnuplot scripts.
        """
    )
    parser.add_argument('--version', action='version', version='%(prog)s {version}'.format(version=package_version))
    subparsers = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND", parser_class=CustomArgumentParser)
    subparsers.required = True
    helps = {
        "simulate": "simulate one trajectory and write it as CSV and binary",
        "estimate": "estimate f(x0) on a stored or freshly simulated trajectory",
        "figure": "distribution of the estimates over a grid of x0",
        "rate": "RMSE over a list of diffusivities and its log-log slope",
        "coverage": "empirical coverage of the confidence intervals",
        "occupation": "occupation-time concentration over a list of diffusivities",
        "variance-scan": "variance of spatial averages over a list of bandwidths",
        "growing-window": "RMSE over growing observation windows at nu = sigma = 1",
        "rescale-check": "moments of the field against the rescaled unit-diffusivity equation",
    }
    for name in SUBCOMMANDS:
        subparsers.add_parser(name, parents=[common], help=helps[name])
    return parser


def demo():
    """
    Entry-point for spdereact-demo
    """
    demo_config = os.path.join(os.path.dirname(__file__), "demo", "demo.toml")
    argparser = prepare_argparser()
    args = argparser.parse_args(["figure", "--config", demo_config, "--out", "spdereact_demo"])
    _main(args)


def main(argv=None):
    """
    Main entry-point
    """
    from psutil import virtual_memory

    from .constants import PERC_ALLOCATED_VRAM
    from .utils import limit_memory

    if platform != "darwin":
        limit_memory(PERC_ALLOCATED_VRAM * virtual_memory().total / 100)
    argparser = prepare_argparser()
    args = argparser.parse_args(argv)
    _main(args)


def _run_subcommand(subcommand, cfg):
    """
    Run one subcommand and return (files written, results for the manifest).
    """
    from . import harness
    from .constants import OutputFiles

    if subcommand == "simulate":
        traj = harness.run_simulate(cfg)
        return ([OutputFiles.TrajectoryCsv, OutputFiles.TrajectoryBin, OutputFiles.Realisation,
                 OutputFiles.RealisationScript], {"seed": traj.seed})
    if subcommand == "estimate":
        _, summary = harness.run_estimate(cfg)
        return [OutputFiles.Estimate], summary
    if subcommand == "figure":
        reports = harness.run_figure_experiment(cfg)
        return ([OutputFiles.FigureLeft, OutputFiles.FigureRight, OutputFiles.FigureScript, OutputFiles.SummaryStats],
                {"n_failed": {x0: r.n_failed for x0, r in reports.items()}})
    if subcommand == "rate":
        result = harness.run_rate_experiment(cfg)
        return [OutputFiles.Rate, OutputFiles.RateScript], result.as_summary()
    if subcommand == "coverage":
        result = harness.run_coverage_experiment(cfg)
        return [OutputFiles.Coverage, OutputFiles.Estimate, OutputFiles.SummaryStats], result.as_summary()
    if subcommand == "occupation":
        harness.run_occupation(cfg)
        return [OutputFiles.Occupation], {}
    if subcommand == "variance-scan":
        harness.run_variance_scan(cfg)
        outputs = [OutputFiles.VarianceScan]
        if cfg.n_runs >= 1000:
            outputs.append(OutputFiles.Histogram)
        return outputs, {}
    if subcommand == "growing-window":
        result = harness.run_growing_window_experiment(cfg)
        return [OutputFiles.GrowingWindow, OutputFiles.GrowingWindowScript], result.as_summary()
    report = harness.run_rescale_check(cfg)
    return [OutputFiles.RescaleCheck], {"max_mean_discrepancy": report.max_mean_discrepancy, "max_z": report.max_z,
                                        "max_second_moment_discrepancy": report.max_second_moment_discrepancy}


def _main(args):
    """
    The main function / pipeline for spdereact.
    """
    import logging
    import sys

    from . import constants
    from .config import load_config
    from .exceptions import SpdeReactError, exit_code_for
    from .postprocess import write_manifest
    from .validation import check_output_dir, validate_for_subcommand

    root = logging.getLogger()
    handlers = []
    try:
        ###################
        # Setup logging   #
        ###################

        # Change root logger level from WARNING (default) to NOTSET in order for all messages to be delegated.
        root.setLevel(logging.NOTSET)

        # Add stdout handler, with level INFO.
        console = logging.StreamHandler(sys.stdout)
        console.setLevel(logging.INFO)
        formatter = logging.Formatter('%(asctime)s - %(levelname)s - %(message)s')
        console.setFormatter(formatter)
        root.addHandler(console)
        handlers.append(console)

        ###################
        # Load config     #
        ###################

        try:
            cfg = load_config(args.config, seed=args.seed, runs=args.runs, out=args.out, workers=args.workers)
            check_output_dir(cfg.output_dir)
            validate_for_subcommand(cfg, args.subcommand)
        except SpdeReactError as e:
            logging.error("%s Aborting.", e)
            sys.exit(exit_code_for(e))

        log_dir = constants.log_dir(cfg.output_dir)
        if not os.path.exists(log_dir):
            logging.info("Make .log directory")
            os.mkdir(log_dir)

        # Add file handler, with level DEBUG.
        fileHandler = logging.FileHandler(filename=os.path.join(log_dir, '{}_debug.log'.format(__package__)), mode="w")
        fileHandler.setLevel(logging.DEBUG)
        fileHandler.setFormatter(formatter)
        root.addHandler(fileHandler)
        handlers.append(fileHandler)

        ###################
        # Run experiment  #
        ###################

        logging.info("Running '%s' with %s run(s) on %s worker(s), base seed %s.", args.subcommand, cfg.n_runs,
                     cfg.workers, cfg.base_seed)
        try:
            outputs, results = _run_subcommand(args.subcommand, cfg)
        except SpdeReactError as e:
            logging.error("%s: %s Aborting.", e.__class__.__name__, e)
            sys.exit(exit_code_for(e))

        ###################
        # Post-processing #
        ###################

        write_manifest(cfg.output_dir, args.subcommand, cfg, outputs, results)
        logging.info("%s finished successfully." % __package__)
        sys.exit(0)
    except KeyboardInterrupt:
        logging.error("User interrupted processing. Aborting.")
        sys.exit(130)
    finally:
        for handler in handlers:
            root.removeHandler(handler)
            handler.close()
