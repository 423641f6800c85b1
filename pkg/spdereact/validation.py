import math
import os

from .exceptions import ConfigError

KNOWN_KEYS = {
    "model": {"left", "right", "boundary", "gamma_left", "gamma_right", "nu", "sigma", "horizon", "reaction",
              "reaction_value", "initial", "initial_value", "noise", "rho", "rho1", "rho2", "amplitudes"},
    "grid": {"n_space", "n_time", "dx"},
    "estimator": {"x0", "h", "beta", "alpha_bar", "bandwidth_scale", "mode", "gamma", "zeta", "nu_bracket", "joint"},
    "experiment": {"n_runs", "base_seed", "x0_grid", "nu_list", "gamma_list", "h_list", "a_low", "a_high", "t",
                   "output_dir", "workers", "trajectory", "csv_time_stride", "n_bins", "p_max", "buffer"},
}


def validate_sections(raw):
    for section, values in raw.items():
        if section not in KNOWN_KEYS:
            raise ConfigError("Unknown config section [%s]." % section)
        if not isinstance(values, dict):
            raise ConfigError("Config entry '%s' must be a section." % section)
        unknown = set(values) - KNOWN_KEYS[section]
        if unknown:
            raise ConfigError("Unknown keys in [%s]: %s." % (section, ", ".join(sorted(unknown))))


def as_float(section, key, value, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("[%s] %s must be a number, got %r." % (section, key, value))
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError("[%s] %s must be finite." % (section, key))
    if positive and not value > 0:
        raise ConfigError("[%s] %s must be positive, got %s." % (section, key, value))
    return value


def as_int(section, key, value, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError("[%s] %s must be an integer, got %r." % (section, key, value))
    if minimum is not None and value < minimum:
        raise ConfigError("[%s] %s must be at least %s, got %s." % (section, key, minimum, value))
    return value


def as_float_list(section, key, value, positive=False, min_length=1):
    if not isinstance(value, list):
        raise ConfigError("[%s] %s must be a list, got %r." % (section, key, value))
    if len(value) < min_length:
        raise ConfigError("[%s] %s needs at least %s entries." % (section, key, min_length))
    return [as_float(section, key, v, positive) for v in value]


def as_choice(section, key, value, enum_cls):
    try:
        return enum_cls(value)
    except ValueError:
        choices = ", ".join(e.value for e in enum_cls)
        raise ConfigError("[%s] %s must be one of %s, got %r." % (section, key, choices, value))


def check_output_dir(path):
    """
    Create the output directory if needed and make sure it is writable.
    """
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise ConfigError("Cannot create output directory %s: %s" % (path, e))
    if not os.access(path, os.W_OK):
        raise ConfigError("Output directory %s is not writable." % path)
    return path


def check_input_file(path):
    if not os.path.isfile(path):
        raise ConfigError("File %s does not exist." % path)
    return path


SUBCOMMAND_REQUIREMENTS = {
    "figure": ("x0_grid", 1),
    "rate": ("nu_list", 3),
    "growing-window": ("gamma_list", 1),
}


def validate_for_subcommand(cfg, subcommand):
    requirement = SUBCOMMAND_REQUIREMENTS.get(subcommand)
    if requirement:
        key, min_length = requirement
        values = getattr(cfg, key)
        if not values or len(values) < min_length:
            raise ConfigError("Subcommand '%s' needs at least %s value(s) in [experiment] %s."
                              % (subcommand, min_length, key))
    if subcommand == "growing-window" and list(cfg.gamma_list) != sorted(cfg.gamma_list):
        raise ConfigError("[experiment] gamma_list must be increasing.")
    if subcommand == "variance-scan" and cfg.n_runs < 100:
        raise ConfigError("Subcommand 'variance-scan' needs n_runs >= 100, got %s." % cfg.n_runs)
    if subcommand == "estimate" and cfg.trajectory:
        check_input_file(cfg.trajectory)
