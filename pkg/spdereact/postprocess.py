import csv
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
import json
import logging
import os.path

from .constants import CsvHeaders, OutputFiles
from .utils import format_stats_line


def package_version():
    try:
        return version(__package__)
    except PackageNotFoundError:
        return "unknown"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):
        return obj.item()
    if isinstance(obj, float) and obj != obj:
        return None
    return obj


def write_manifest(output_dir, subcommand, cfg, outputs, results=None):
    """
    Write the manifest accompanying every run: the configuration echo, the seed rule, the toolkit version and
    the files produced. The timestamp is the only field that differs between identical runs.
    """
    manifest = {
        "package": __package__,
        "version": package_version(),
        "subcommand": subcommand,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "config": cfg.raw,
        "seeds": {
            "base_seed": cfg.base_seed,
            "n_runs": cfg.n_runs,
            "rule": "seed = base_seed + run_index",
        },
        "workers": cfg.workers,
        "outputs": sorted(outputs),
        "results": results or {},
    }
    fn = os.path.join(output_dir, OutputFiles.Manifest)
    with open(fn, 'w') as f:
        json.dump(_jsonable(manifest), f, indent=2, sort_keys=True)
    logging.info("Wrote manifest %s.", fn)
    return fn


def write_summary_stats(output_dir, title, n_runs, n_failed):
    fn = os.path.join(output_dir, OutputFiles.SummaryStats)
    with open(fn, 'a') as fstats:
        logging.info("Writing summary statistics file.")
        fstats.write(title + "\n")
        fstats.write(format_stats_line("Total runs", n_runs))
        fstats.write(format_stats_line("\t...with usable estimates", n_runs, n_runs - n_failed))
        fstats.write(format_stats_line("\t...without data on both sides of x0", n_runs, n_failed))
    return fn


def write_histogram(diagnostic, fn):
    with open(fn, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(CsvHeaders.Histogram)
        writer.writerows(diagnostic.histogram)


def write_comparison(report, fn):
    with open(fn, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(CsvHeaders.RescaleCheck)
        writer.writerows(zip(report.points, report.mean_discrepancy, report.second_moment_discrepancy,
                             report.mean_stderr))


FIGURE_SCRIPT = """\
set datafile separator ","
set terminal pngcairo size 1200,500
set output "figure3.png"
set multiplot layout 1,2
set key top right
set xlabel "x0"
set title "Median and 5%/95% quantiles of the estimates"
plot "{left}" using 1:3:4 skip 1 with filledcurves lc rgb "#c6dbef" title "5%-95%", \\
     "" using 1:2 skip 1 with linespoints lc rgb "#08519c" title "median", \\
     "" using 1:6 skip 1 with lines dt 2 lc rgb "black" title "f"
set title "Interquartile range of the estimates"
plot "{right}" using 1:2 skip 1 with linespoints lc rgb "#08519c" title "IQR"
unset multiplot
"""

RATE_SCRIPT = """\
set datafile separator ","
set terminal pngcairo size 700,500
set output "rate.png"
set logscale xy
set xlabel "sigma"
set ylabel "RMSE"
set key top left
set title "Fitted slope {slope:.3f} (target {target:.3f})"
plot "{data}" using 2:4 skip 1 with linespoints title "RMSE", \\
     {intercept:.6g} * x**{slope:.6g} with lines dt 2 title "fit"
"""

GROWING_WINDOW_SCRIPT = """\
set datafile separator ","
set terminal pngcairo size 700,500
set output "growing_window.png"
set logscale xy
set xlabel "gamma"
set ylabel "RMSE"
set title "Estimation error over growing windows"
plot "{data}" using 1:3 skip 1 with linespoints title "RMSE"
"""


def write_script(template, fn, **kwargs):
    with open(fn, 'w') as f:
        f.write(template.format(**kwargs))
    logging.info("Wrote gnuplot script %s.", fn)
    return fn

REALISATION_SCRIPT = """\
set datafile separator ","
set terminal pngcairo size {width},450
set output "figure2.png"
set multiplot layout 1,{panels}
set xlabel "y"
set ylabel "t"
set palette rgbformulae 33,13,10
unset key
{body}unset multiplot
"""

REALISATION_PANEL = """\
set title "nu = {nu:g}"
plot "{data}" using 3:2:(abs($1 - {nu!r}) < 1e-12 ? $4 : 1/0) skip 1 with points pt 5 ps 0.3 lc palette
"""

REALISATION_BAND_PANEL = """\
set title "|X - {x0:g}| <= {band:g} at nu = {nu:g}"
plot "{data}" using 3:2:(abs($1 - {nu!r}) < 1e-12 && $5 > 0 ? 1 : 1/0) skip 1 with points pt 5 ps 0.3 lc rgb "black"
"""


def write_realisation_script(fn, data, nu_list, x0, band):
    """
    One field panel per diffusivity, then the cells within band of x0 for the smallest diffusivity.
    """
    body = "".join(REALISATION_PANEL.format(nu=float(nu), data=data) for nu in nu_list)
    body += REALISATION_BAND_PANEL.format(nu=float(min(nu_list)), data=data, x0=x0, band=band)
    panels = len(nu_list) + 1
    return write_script(REALISATION_SCRIPT, fn, width=450 * panels, panels=panels, body=body)
