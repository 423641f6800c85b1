"""
Reaction functions, the coupling between diffusivity and noise level, and closed-form scaling
integrals of the stochastic convolution used as analytic oracles.
"""
import math

import numpy as np
from scipy import integrate, special

from .constants import (ALLEN_CAHN_CUTOFF, ALLEN_CAHN_LIPSCHITZ, NoiseKind, RIESZ_QUADRATURE_RANGE,
                        RIESZ_QUADRATURE_TOL)
from .exceptions import ConfigError, OutOfRegimeError
from .models import ReactionFn


def allen_cahn(x):
    """
    Cubic phase-field reaction -(x^3 - 9x) with stable points at +-3, continued linearly with
    slope -1 beyond |x| >= 10 so that it is globally Lipschitz.
    """
    x = np.asarray(x, dtype=float)
    c = ALLEN_CAHN_CUTOFF
    value = np.where(x <= -c, -x + c ** 3 - c ** 2,
                     np.where(x >= c, -x - c ** 3 + c ** 2, -(x ** 3 - 9 * x)))
    return value.item() if value.ndim == 0 else value


class ConstantReaction:

    def __init__(self, value):
        self.value = float(value)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        value = np.full_like(x, self.value)
        return value.item() if value.ndim == 0 else value

    def __repr__(self):
        return "<%s: %s>" % (self.__class__.__name__, self.value)


class LinearReaction:

    def __init__(self, slope):
        self.slope = float(slope)

    def __call__(self, x):
        value = self.slope * np.asarray(x, dtype=float)
        return value.item() if value.ndim == 0 else value

    def __repr__(self):
        return "<%s: %s>" % (self.__class__.__name__, self.slope)


ALLEN_CAHN = ReactionFn(allen_cahn, ALLEN_CAHN_LIPSCHITZ, name="allen_cahn")


def reaction_from_name(name, value=0.0):
    if name == "allen_cahn":
        return ALLEN_CAHN
    if name == "zero":
        return ReactionFn(ConstantReaction(0.0), 0.0, name="zero")
    if name == "constant":
        return ReactionFn(ConstantReaction(value), 0.0, name="constant")
    if name == "linear":
        return ReactionFn(LinearReaction(value), abs(value), name="linear")
    raise ConfigError("Unknown reaction function '%s'." % name)


class ConstantInitial:

    def __init__(self, value):
        self.value = float(value)

    def __call__(self, y):
        return np.full_like(np.asarray(y, dtype=float), self.value)


class SineInitial:
    """
    First Dirichlet eigenfunction of the interval, scaled by `amplitude`.
    """

    def __init__(self, left, length, amplitude=1.0):
        self.left = left
        self.length = length
        self.amplitude = amplitude

    def __call__(self, y):
        return self.amplitude * np.sin(np.pi * (np.asarray(y, dtype=float) - self.left) / self.length)


class RescaledInitial:
    """
    y -> initial(factor * y).
    """

    def __init__(self, initial, factor):
        self.initial = initial
        self.factor = factor

    def __call__(self, y):
        return self.initial(self.factor * np.asarray(y, dtype=float))


def initial_from_name(name, domain, value=0.0):
    if name == "zero":
        return None
    if name == "constant":
        return ConstantInitial(value)
    if name == "sine":
        return SineInitial(domain.left, domain.length, value or 1.0)
    raise ConfigError("Unknown initial condition '%s'." % name)


def sigma_of_nu(noise, nu):
    """
    Noise level coupled to the diffusivity so that the marginal variance of the field stays of
    order one as nu -> 0.
    """
    if not nu > 0:
        raise ConfigError("Diffusivity nu must be positive, got %s." % nu)
    if noise.kind is NoiseKind.White:
        return nu ** 0.25
    if noise.kind is NoiseKind.Riesz:
        return nu ** (noise.rho / 4)
    return nu ** ((1 - 2 * noise.rho2) / (2 * noise.rho1))


def alpha_of(noise):
    if noise.kind is NoiseKind.White:
        alpha = 0.5
    elif noise.kind is NoiseKind.Riesz:
        alpha = 1 - noise.rho / 2
    else:
        alpha = 1 + (2 * noise.rho2 - 1) / noise.rho1
    if not 0 < alpha < 1:
        raise ConfigError("Noise parameters give alpha=%s outside (0, 1)." % alpha)
    return alpha


def rate_exponent(noise, beta):
    """
    Exponent r in RMSE ~ nu^r when h is chosen by the bandwidth rule, i.e. the nu-exponent of
    sigma^(2 beta / (1 + 2 beta)).
    """
    # sigma is a power of nu, so its exponent is log(sigma(e)).
    return math.log(sigma_of_nu(noise, math.e)) * 2 * beta / (1 + 2 * beta)


def heat_kernel_square(eta):
    # Squared free heat kernel at unit time, integrated over the diagonal direction.
    return np.exp(-np.asarray(eta) ** 2 / 8) / math.sqrt(8 * math.pi)


_riesz_cache = {}


def riesz_constant(rho):
    if rho not in _riesz_cache:
        half, _ = integrate.quad(heat_kernel_square, 0.0, RIESZ_QUADRATURE_RANGE, weight="alg", wvar=(-rho, 0.0),
                                 epsabs=RIESZ_QUADRATURE_TOL, epsrel=RIESZ_QUADRATURE_TOL)
        _riesz_cache[rho] = 2 * half / (1 - rho / 2)
    return _riesz_cache[rho]


def riesz_constant_exact(rho):
    """
    Closed form of the Riesz constant through the Gamma function.
    """
    return 2 ** (-1.5 * rho) * special.gamma((1 - rho) / 2) / math.sqrt(math.pi) / (1 - rho / 2)


def spectral_scaling_integral(rho1, rho2, nu, t):
    """
    Order of the spectral-noise scaling integral in its three regimes of rho2.
    """
    if rho2 < 0.5:
        exponent = (2 * rho2 - 1) / rho1
        return nu ** exponent * t ** (1 + exponent)
    if rho2 == 0.5:
        if nu * t >= 1:
            raise OutOfRegimeError("Logarithmic spectral case needs nu * t < 1, got %s." % (nu * t))
        return t * (1 - math.log(nu * t) / rho1)
    return t


def noise_scaling_integral(noise, nu, t):
    if not nu > 0 or not t > 0:
        raise ConfigError("Scaling integral needs nu > 0 and t > 0.")
    if noise.kind is NoiseKind.White:
        return math.sqrt(2) / (4 * math.sqrt(math.pi)) * math.sqrt(t / nu)
    if noise.kind is NoiseKind.Riesz:
        return riesz_constant(noise.rho) * t ** (1 - noise.rho / 2) * nu ** (-noise.rho / 2)
    return spectral_scaling_integral(noise.rho1, noise.rho2, nu, t)


