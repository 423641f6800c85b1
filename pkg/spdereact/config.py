"""
TOML configuration with sections [model], [grid], [estimator] and [experiment]. Missing keys take the desk-scale
defaults; command-line overrides are written back into the raw mapping so the manifest echoes the effective run.
"""
import copy
import logging

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from . import constants
from .constants import Boundary, EstimatorMode, NoiseKind
from .estimate import default_kernels, select_bandwidth
from .exceptions import ConfigError
from .models import Domain, EstimatorConfig, ExperimentConfig, GridSpec, ModelSpec, NoiseSpec
from .problem import initial_from_name, reaction_from_name
from .utils import resolve_workers
from .validation import as_choice, as_float, as_float_list, as_int, check_input_file, validate_sections


def read_toml(path):
    check_input_file(path)
    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError("Cannot parse config file %s: %s" % (path, e))


def _model(section):
    get = section.get
    boundary = as_choice("model", "boundary", get("boundary", "dirichlet"), Boundary)
    left = as_float("model", "left", get("left", constants.DEFAULT_DOMAIN[0]))
    right = as_float("model", "right", get("right", constants.DEFAULT_DOMAIN[1]))
    default_window = constants.DEFAULT_WINDOW if boundary is Boundary.Dirichlet else (left, right)
    domain = Domain(left, right, boundary,
                    as_float("model", "gamma_left", get("gamma_left", default_window[0])),
                    as_float("model", "gamma_right", get("gamma_right", default_window[1])))

    kind = as_choice("model", "noise", get("noise", "white"), NoiseKind)
    if kind is NoiseKind.Riesz:
        noise = NoiseSpec.riesz(as_float("model", "rho", get("rho", 0.75)))
    elif kind is NoiseKind.Spectral:
        amplitudes = get("amplitudes")
        noise = NoiseSpec.spectral(as_float("model", "rho1", get("rho1", 1.0)),
                                   as_float("model", "rho2", get("rho2", 0.0)),
                                   as_float_list("model", "amplitudes", amplitudes) if amplitudes is not None else None)
    else:
        noise = NoiseSpec.white()

    sigma = get("sigma")
    reaction = reaction_from_name(get("reaction", "allen_cahn"),
                                  as_float("model", "reaction_value", get("reaction_value", 0.0)))
    return ModelSpec(
        domain=domain,
        nu=as_float("model", "nu", get("nu", constants.DEFAULT_NU), positive=True),
        noise=noise,
        reaction=reaction,
        horizon=as_float("model", "horizon", get("horizon", constants.DEFAULT_HORIZON), positive=True),
        initial=initial_from_name(get("initial", "zero"), domain,
                                  as_float("model", "initial_value", get("initial_value", 0.0))),
        sigma_override=as_float("model", "sigma", sigma) if sigma is not None else None,
    )


def _grid(section, model):
    n_space = as_int("grid", "n_space", section.get("n_space", constants.DEFAULT_N_SPACE), minimum=3)
    n_time = section.get("n_time")
    return GridSpec.for_model(model, n_space, as_int("grid", "n_time", n_time, minimum=1) if n_time is not None else None)


def _estimator(section, model):
    get = section.get
    mode = as_choice("estimator", "mode", get("mode", EstimatorMode.SmallDiffusivity.value), EstimatorMode)
    beta = as_float("estimator", "beta", get("beta", constants.DEFAULT_BETA))
    scale = as_float("estimator", "bandwidth_scale", get("bandwidth_scale", 1.0), positive=True)
    gamma = as_float("estimator", "gamma", get("gamma"), positive=True) if get("gamma") is not None else None
    if mode is EstimatorMode.GrowingWindow and gamma is None:
        gamma = model.domain.gamma_measure
    if get("h") is not None:
        h = as_float("estimator", "h", get("h"), positive=True)
    elif mode is EstimatorMode.GrowingWindow:
        h = select_bandwidth(1.0, beta, gamma=gamma, scale=scale)
    else:
        if not model.sigma > 0:
            raise ConfigError("[estimator] h is required when sigma is zero.")
        h = select_bandwidth(model.sigma, beta, scale=scale)
    return EstimatorConfig(
        x0=as_float("estimator", "x0", get("x0", constants.DEFAULT_X0)),
        h=h,
        kernels=default_kernels(),
        beta=beta,
        nu_known=model.nu,
        sigma=model.sigma,
        mode=mode,
        gamma=gamma,
        alpha_bar=as_float("estimator", "alpha_bar", get("alpha_bar", constants.DEFAULT_ALPHA_BAR)),
    )


def _optional_list(section, key, positive=False):
    value = section.get(key)
    return as_float_list("experiment", key, value, positive) if value is not None else None


def build_config(raw, seed=None, runs=None, out=None, workers=None):
    """
    Build an ExperimentConfig from a parsed TOML mapping and optional command-line overrides.
    """
    raw = copy.deepcopy(raw)
    validate_sections(raw)
    for section in constants.CONFIG_SECTIONS:
        raw.setdefault(section, {})
    experiment = raw["experiment"]
    if seed is not None:
        experiment["base_seed"] = seed
    if runs is not None:
        experiment["n_runs"] = runs
    if out is not None:
        experiment["output_dir"] = out
    config_workers = experiment.get("workers")
    experiment["workers"] = resolve_workers(
        workers, as_int("experiment", "workers", config_workers, minimum=1) if config_workers is not None else None)

    model = _model(raw["model"])
    grid = _grid(raw["grid"], model)
    estimator = _estimator(raw["estimator"], model)
    est = raw["estimator"]
    get = experiment.get
    bracket = est.get("nu_bracket", list(constants.DEFAULT_NU_BRACKET))
    bracket = as_float_list("estimator", "nu_bracket", bracket, positive=True, min_length=2)
    a_low, a_high = (as_float("experiment", key, get(key, default))
                     for key, default in zip(("a_low", "a_high"), constants.DEFAULT_OCCUPATION_WINDOW))
    if a_low > a_high:
        raise ConfigError("[experiment] a_low must not exceed a_high.")
    t = get("t")
    p_max = get("p_max")
    zeta = est.get("zeta")
    cfg = ExperimentConfig(
        model=model,
        grid=grid,
        estimator=estimator,
        n_runs=as_int("experiment", "n_runs", get("n_runs", constants.DEFAULT_N_RUNS), minimum=1),
        base_seed=as_int("experiment", "base_seed", get("base_seed", constants.DEFAULT_BASE_SEED), minimum=0),
        x0_grid=_optional_list(experiment, "x0_grid"),
        nu_list=_optional_list(experiment, "nu_list", positive=True),
        gamma_list=_optional_list(experiment, "gamma_list", positive=True),
        h_list=_optional_list(experiment, "h_list", positive=True),
        output_dir=str(get("output_dir", ".")),
        workers=experiment["workers"],
        t=as_float("experiment", "t", t) if t is not None else None,
        a_low=a_low,
        a_high=a_high,
        zeta=as_float("estimator", "zeta", zeta) if zeta is not None else None,
        trajectory=get("trajectory"),
        csv_time_stride=as_int("experiment", "csv_time_stride", get("csv_time_stride", 1), minimum=1),
        n_bins=as_int("experiment", "n_bins", get("n_bins", 50), minimum=1),
        p_max=as_float("experiment", "p_max", p_max, positive=True) if p_max is not None else None,
        buffer=as_float("experiment", "buffer", get("buffer", constants.GROWING_WINDOW_BUFFER), positive=True),
        growing_dx=as_float("grid", "dx", raw["grid"].get("dx", constants.DEFAULT_GROWING_DX), positive=True),
        bandwidth_scale=as_float("estimator", "bandwidth_scale", est.get("bandwidth_scale", 1.0), positive=True),
        joint=bool(est.get("joint", False)),
        nu_bracket=(bracket[0], bracket[1]),
        raw=raw,
    )
    if cfg.t is not None:
        cfg.grid.time_index(cfg.t)
    logging.debug("Loaded configuration: %s", raw)
    return cfg


def load_config(path=None, seed=None, runs=None, out=None, workers=None):
    raw = read_toml(path) if path else {}
    return build_config(raw, seed=seed, runs=runs, out=out, workers=workers)
