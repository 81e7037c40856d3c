"""Generalized EM for models fitted under the EMG mixture residual model.

The M-step does not maximize; it runs a bounded number of curvature-scaled
gradient steps with an Armijo backtracking line search, first on the model
parameters, then on (sigma, lambda) in log space, then sets epsilon to the
mean responsibility. Every accepted step decreases the expected negative
log-likelihood, so the observed log-likelihood never decreases.
"""
from dataclasses import dataclass, field
import logging
import math

import numpy as np

from . import kernels as K
from .density import EmgParams, MixtureParams, PARAM_FLOOR
from .errors import ContractError, DescentError, DomainError, FitError

logger = logging.getLogger(__name__)

_LOG_HALF_NORMAL = math.log(2.0) - 0.5 * math.log(2.0 * math.pi)


@dataclass
class LineSearchOptions:
    shrink: float = 0.5
    c: float = 1e-4
    max_backtracks: int = 40


@dataclass
class FitOptions:
    max_em_iters: int = 500
    max_inner_iters: int = 20
    loglik_rel_tol: float = 1e-8
    line_search: LineSearchOptions = field(default_factory=LineSearchOptions)
    # scale of the half-Normal prior on sigma; 0 disables it
    sigma_prior_scale: float = 0.0
    curvature_floor: float = 1e-8
    # raise DescentError instead of stopping when no Armijo step exists
    raise_on_stall: bool = False

    def __post_init__(self):
        ls = self.line_search
        if self.max_em_iters < 1 or self.max_inner_iters < 1:
            raise DomainError("iteration caps must be >= 1")
        if not self.loglik_rel_tol > 0 or not self.curvature_floor > 0:
            raise DomainError("tolerances must be positive")
        if not 0 < ls.shrink < 1 or not 0 < ls.c < 1 or ls.max_backtracks < 1:
            raise DomainError("line search needs shrink, c in (0, 1) and >= 1 backtrack")
        if not self.sigma_prior_scale >= 0:
            raise DomainError("sigma_prior_scale must be >= 0")


class ModelAdapter:
    """A model M(theta) giving one location per datum.

    ``theta`` is a flat float array. Subclasses implement ``predict``,
    ``grad_accumulate`` (sum_i w_i dM_i/dtheta) and ``curvature_accumulate``
    (sum_i h_i (dM_i/dtheta)^2, the exact Hessian diagonal for models linear
    in each coordinate). ``blocks`` lists coordinate groups that the M-step
    updates in turn.
    """

    n_data = 0

    def predict(self, theta):
        raise NotImplementedError

    def grad_accumulate(self, theta, w):
        raise NotImplementedError

    def curvature_accumulate(self, theta, h):
        raise NotImplementedError

    def project(self, theta):
        return theta

    def blocks(self, theta):
        return [np.arange(theta.size)]


@dataclass
class DescentResult:
    x: np.ndarray
    value: float
    iterations: int
    status: str
    trace: list


@dataclass
class FitResult:
    theta: np.ndarray
    trace: np.ndarray
    iterations: int
    converged: bool
    mix: MixtureParams = None
    gamma: np.ndarray = None
    # exact (unsmoothed) objective for loss fits
    objective: float = None

    @property
    def loglik_trace(self):
        return self.trace


def _check_lengths(data, preds, gamma=None):
    data = np.asarray(data, dtype=np.float64)
    preds = np.asarray(preds, dtype=np.float64)
    if data.shape != preds.shape or data.ndim != 1:
        raise ContractError(f"data {data.shape} and predictions {preds.shape} differ")
    if gamma is not None:
        gamma = np.asarray(gamma, dtype=np.float64)
        if gamma.shape != data.shape:
            raise ContractError(f"gamma {gamma.shape} does not match data {data.shape}")
    return data, preds, gamma


def log_sigma_prior(sigma, scale):
    """log density of the half-Normal(0, scale) prior; 0 when disabled."""
    if scale <= 0:
        return 0.0
    return _LOG_HALF_NORMAL - math.log(scale) - 0.5 * (sigma / scale) ** 2


def e_step(data, preds, mix):
    """Posterior probability that each datum carries a peak."""
    data, preds, _ = _check_lengths(data, preds)
    eps = mix.epsilon
    if eps == 0.0:
        return np.zeros_like(data)
    if eps == 1.0:
        return np.ones_like(data)
    t = K.emg_terms(data - preds - mix.emg.mu, mix.emg.sigma, mix.emg.lam)
    # log odds of "no peak" against "peak"
    a = (math.log1p(-eps) - t[K.NLN]) - (math.log(eps) - t[K.NLE])
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(a))


def expected_loglik(data, preds, gamma, mix, sigma_prior_scale=0.0):
    data, preds, gamma = _check_lengths(data, preds, gamma)
    t = K.emg_terms(data - preds - mix.emg.mu, mix.emg.sigma, mix.emg.lam)
    val = -np.sum((1.0 - gamma) * t[K.NLN] + gamma * t[K.NLE])
    return val + log_sigma_prior(mix.emg.sigma, sigma_prior_scale)


def observed_loglik(data, preds, mix):
    data, preds, _ = _check_lengths(data, preds)
    t = K.emg_terms(data - preds - mix.emg.mu, mix.emg.sigma, mix.emg.lam)
    eps = mix.epsilon
    if eps == 0.0:
        return -np.sum(t[K.NLN])
    if eps == 1.0:
        return -np.sum(t[K.NLE])
    return np.sum(np.logaddexp(math.log1p(-eps) - t[K.NLN], math.log(eps) - t[K.NLE]))


def scaled_descent(objective, x0, curvature, opts, project=None):
    """Minimize ``objective`` from ``x0`` by curvature-scaled gradient steps.

    ``objective(x)`` returns ``(value, gradient)``; ``curvature(x)`` returns
    per-coordinate second-derivative estimates at the last point passed to
    ``objective``. The direction is -grad / max(|curvature|, floor) and the
    step length comes from Armijo backtracking, so no ascent step is ever
    accepted.
    """
    ls = opts.line_search
    x = np.array(x0, dtype=np.float64)
    f, g = objective(x)
    if not np.isfinite(f):
        raise FitError(f"objective is not finite at the starting point ({f})")
    trace = [f]
    status = "max_iter"
    it = 0
    for it in range(1, opts.max_inner_iters + 1):
        c = np.maximum(np.abs(curvature(x)), opts.curvature_floor)
        d = -g / c
        slope = float(g @ d)
        if not slope < 0.0:
            status = "stationary"
            it -= 1
            break
        t = 1.0
        accepted = False
        for _ in range(ls.max_backtracks + 1):
            xt = x + t * d
            if project is not None:
                xt = project(xt)
            ft, gt = objective(xt)
            if np.isfinite(ft) and ft <= f + ls.c * t * slope:
                accepted = True
                break
            t *= ls.shrink
        if not accepted:
            if opts.raise_on_stall:
                raise DescentError("no sufficient-decrease step", float(np.linalg.norm(g)))
            # restore the cache of objective/curvature at x
            objective(x)
            status = "stalled"
            it -= 1
            break
        decrease = f - ft
        x, f, g = xt, ft, gt
        trace.append(f)
        if decrease <= opts.loglik_rel_tol * max(abs(f), 1e-300):
            status = "converged"
            break
    return DescentResult(x, f, it, status, trace)


class _BlockObjective:
    """Sum of pointwise losses of D - M(theta) as a function of one block.

    ``pointwise(resid)`` returns (total, w, h) with w, h the first and
    second derivatives of each datum's loss with respect to its location.
    """

    def __init__(self, adapter, theta, block, pointwise):
        self.adapter = adapter
        self.theta = theta.copy()
        self.block = block
        self.pointwise = pointwise
        self._h = None
        self._x = None

    def full(self, x):
        th = self.theta.copy()
        th[self.block] = x
        return th

    def __call__(self, x):
        th = self.full(x)
        total, w, h = self.pointwise(self.adapter.predict(th))
        self._x = x
        self._th = th
        self._h = h
        g = self.adapter.grad_accumulate(th, w)[self.block]
        return total, g

    def curvature(self, x):
        if self._x is None or not np.array_equal(x, self._x):
            self(x)
        return self.adapter.curvature_accumulate(self._th, self._h)[self.block]

    def project(self, x):
        return self.adapter.project(self.full(x))[self.block]


def _emgm_pointwise(data, gamma, mix):
    s, lam, mu0 = mix.emg.sigma, mix.emg.lam, mix.emg.mu
    wn = 1.0 - gamma

    def pointwise(preds):
        t = K.emg_terms(data - preds - mu0, s, lam, True)
        total = np.sum(wn * t[K.NLN] + gamma * t[K.NLE])
        w = wn * t[K.N_MU] + gamma * t[K.E_MU]
        h = wn * t[K.N_MUMU] + gamma * t[K.E_MUMU]
        return total, w, h

    return pointwise


class _ScaleObjective:
    """Expected negative log-likelihood in (log sigma, log lambda)."""

    def __init__(self, resid, gamma, prior_scale):
        self.resid = resid
        self.gamma = gamma
        self.wn = 1.0 - gamma
        self.prior_scale = prior_scale
        self._curv = None

    def __call__(self, x):
        s, lam = math.exp(x[0]), math.exp(x[1])
        if not (PARAM_FLOOR <= s < np.inf and PARAM_FLOOR <= lam < np.inf):
            self._curv = None
            return np.inf, np.zeros(2)
        t = K.emg_terms(self.resid, s, lam, True)
        wn, ga = self.wn, self.gamma
        f = np.sum(wn * t[K.NLN] + ga * t[K.NLE])
        fs = np.sum(wn * t[K.N_S] + ga * t[K.E_S])
        fss = np.sum(wn * t[K.N_SS] + ga * t[K.E_SS])
        fl = np.sum(ga * t[K.E_L])
        fll = np.sum(ga * t[K.E_LL])
        if self.prior_scale > 0:
            f -= log_sigma_prior(s, self.prior_scale)
            fs += s / self.prior_scale ** 2
            fss += 1.0 / self.prior_scale ** 2
        grad = np.array([s * fs, lam * fl])
        self._curv = np.array([s * s * fss + s * fs, lam * lam * fll + lam * fl])
        return f, grad

    def curvature(self, x):
        return self._curv


def m_step(data, adapter, theta, mix, gamma, opts):
    """One GEM maximization step; returns the updated (theta, mix)."""
    data = np.asarray(data, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    theta = np.array(theta, dtype=np.float64)
    _check_lengths(data, adapter.predict(theta), gamma)

    pointwise = _emgm_pointwise(data, gamma, mix)
    for block in adapter.blocks(theta):
        obj = _BlockObjective(adapter, theta, block, pointwise)
        res = scaled_descent(obj, theta[block], obj.curvature, opts, project=obj.project)
        theta = obj.full(res.x)

    resid = data - adapter.predict(theta) - mix.emg.mu
    scale_obj = _ScaleObjective(resid, gamma, opts.sigma_prior_scale)
    x0 = np.array([math.log(mix.emg.sigma), math.log(mix.emg.lam)])
    res = scaled_descent(scale_obj, x0, scale_obj.curvature, opts)
    sigma, lam = math.exp(res.x[0]), math.exp(res.x[1])

    eps = float(np.mean(gamma)) if gamma.size else mix.epsilon
    new_mix = MixtureParams(EmgParams(mix.emg.mu, sigma, lam), min(max(eps, 0.0), 1.0))
    return theta, new_mix


def log_posterior(data, preds, mix, sigma_prior_scale=0.0):
    """Observed log-likelihood plus the log prior on sigma (if enabled)."""
    return observed_loglik(data, preds, mix) + log_sigma_prior(mix.emg.sigma, sigma_prior_scale)


def fit_emgm(data, adapter, init, opts=None):
    """Run GEM from ``init = (theta, mix)`` until the log-likelihood settles.

    The trace holds the observed-data log-likelihood after every iteration
    (plus the log prior on sigma when that prior is enabled).
    """
    opts = opts or FitOptions()
    data = np.asarray(data, dtype=np.float64)
    theta, mix = init
    theta = np.array(theta, dtype=np.float64)
    preds = adapter.predict(theta)
    _check_lengths(data, preds)
    ll = log_posterior(data, preds, mix, opts.sigma_prior_scale)
    if not np.isfinite(ll):
        raise FitError(f"log-likelihood is not finite at the initial parameters ({ll})")
    trace = [ll]
    converged = False
    it = 0
    for it in range(1, opts.max_em_iters + 1):
        gamma = e_step(data, preds, mix)
        theta, mix = m_step(data, adapter, theta, mix, gamma, opts)
        preds = adapter.predict(theta)
        ll_new = log_posterior(data, preds, mix, opts.sigma_prior_scale)
        trace.append(ll_new)
        if abs(ll_new - ll) <= opts.loglik_rel_tol * abs(ll):
            converged = True
            break
        ll = ll_new
    logger.debug("fit_emgm: %d iterations, loglik %.6g, %s", it, trace[-1], mix)
    gamma = e_step(data, preds, mix)
    return FitResult(theta=theta, trace=np.array(trace), iterations=it,
                     converged=converged, mix=mix, gamma=gamma)
