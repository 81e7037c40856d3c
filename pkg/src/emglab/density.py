"""Gaussian, EMG and EMG-mixture densities.

All functions broadcast over ``x`` and return numpy arrays (0-d for scalar
input). The EMG log density avoids the overflow of the textbook form for
``x`` far below the location by going through ``log erfcx``.
"""
from dataclasses import dataclass
import math

import numpy as np

from . import kernels
from .errors import DomainError

PARAM_FLOOR = 1e-12


def _check_positive(name, value):
    if not np.isfinite(value) or value < PARAM_FLOOR:
        raise DomainError(f"{name} must be finite and >= {PARAM_FLOOR}, got {value!r}")


@dataclass(frozen=True)
class EmgParams:
    """Location ``mu``, Gaussian scale ``sigma`` and exponential rate ``lam``."""
    mu: float
    sigma: float
    lam: float

    def __post_init__(self):
        if not np.isfinite(self.mu):
            raise DomainError(f"mu must be finite, got {self.mu!r}")
        _check_positive("sigma", self.sigma)
        _check_positive("lam", self.lam)
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def alpha(self):
        """Shape of the standardized density, lam * sigma."""
        return self.lam * self.sigma


@dataclass(frozen=True)
class MixtureParams:
    emg: EmgParams
    epsilon: float

    def __post_init__(self):
        if not (0.0 <= self.epsilon <= 1.0):
            raise DomainError(f"epsilon must lie in [0, 1], got {self.epsilon!r}")
        object.__setattr__(self, "epsilon", float(self.epsilon))


@dataclass(frozen=True)
class PartialSet:
    """First and second partials of -log EMG with respect to each parameter."""
    d_mu: np.ndarray
    d2_mu: np.ndarray
    d_sigma: np.ndarray
    d2_sigma: np.ndarray
    d_lam: np.ndarray
    d2_lam: np.ndarray


def erfcx(t):
    """exp(t**2) * erfc(t), accurate to a few ulp; ``inf`` below t = -26.6."""
    t = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(t)):
        raise DomainError("erfcx needs finite arguments")
    return kernels.erfcx(t)


def _terms(x, p, derivs=False):
    x = np.asarray(x, dtype=np.float64)
    return x.shape, kernels.emg_terms(x - p.mu, p.sigma, p.lam, derivs)


def gaussian_log_pdf(x, mu, sigma):
    _check_positive("sigma", sigma)
    shape, t = _terms(x, EmgParams(mu, sigma, 1.0))
    return -t[kernels.NLN].reshape(shape)


def emg_log_pdf(x, p):
    shape, t = _terms(x, p)
    return -t[kernels.NLE].reshape(shape)


def std_emg_log_pdf(x, alpha):
    """Log density of the one-parameter EMG with mu = 0, sigma = 1, lam = alpha."""
    if not np.isfinite(alpha) or alpha <= 0:
        raise DomainError(f"alpha must be positive, got {alpha!r}")
    return emg_log_pdf(x, EmgParams(0.0, 1.0, alpha))


def emgm_log_pdf(x, m):
    """log[(1 - eps) N(x) + eps EMG(x)] via log-sum-exp of the components."""
    shape, t = _terms(x, m.emg)
    log_n = -t[kernels.NLN]
    log_e = -t[kernels.NLE]
    eps = m.epsilon
    if eps == 0.0:
        out = log_n
    elif eps == 1.0:
        out = log_e
    else:
        out = np.logaddexp(math.log1p(-eps) + log_n, math.log(eps) + log_e)
    return out.reshape(shape)


def neg_log_emg_partials(x, p):
    shape, t = _terms(x, p, derivs=True)
    k = kernels
    return PartialSet(*(t[row].reshape(shape) for row in
                        (k.E_MU, k.E_MUMU, k.E_S, k.E_SS, k.E_L, k.E_LL)))


def emg_sample(rng, p, n):
    """Draw ``n`` values of Exp(lam) + N(mu, sigma)."""
    if n < 1:
        raise DomainError("sample size must be >= 1")
    expo = rng.exponential(1.0 / p.lam, size=n)
    gauss = rng.normal(p.mu, p.sigma, size=n)
    return expo + gauss
