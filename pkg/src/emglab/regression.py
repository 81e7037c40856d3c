"""Contaminated linear regression experiments.

Data follow y = (pi/2) x + e + G + 1_C C with G ~ N(0, 1/2) and a positive
contaminant C on a fixed fraction of points. Errors are reported as
truth - estimate, so an estimator that sits above the true line has a
negative mean error.
"""
from dataclasses import dataclass, field, asdict
import logging
import math

import numpy as np

from .adapters import LineAdapter
from .density import EmgParams, MixtureParams
from .em import FitOptions, fit_emgm
from .errors import DomainError
from .objectives import LossKind, fit_loss

logger = logging.getLogger(__name__)

SLOPE_TRUE = math.pi / 2
INTERCEPT_TRUE = math.e


@dataclass(frozen=True)
class Contamination:
    kind: str = "exp"          # "exp", "lognormal" or "none"
    rate: float = 0.5          # exponential rate
    mu_ln: float = 0.0
    sigma_ln: float = 1.0

    def __post_init__(self):
        if self.kind not in ("exp", "lognormal", "none"):
            raise DomainError(f"unknown contamination {self.kind!r}")
        if self.kind == "exp" and not self.rate > 0:
            raise DomainError("exponential rate must be positive")
        if self.kind == "lognormal" and not self.sigma_ln > 0:
            raise DomainError("log-normal sigma must be positive")

    def draw(self, rng, size):
        if self.kind == "exp":
            return rng.exponential(1.0 / self.rate, size)
        if self.kind == "lognormal":
            return rng.lognormal(self.mu_ln, self.sigma_ln, size)
        return np.zeros(size)

    def mean(self):
        if self.kind == "exp":
            return 1.0 / self.rate
        if self.kind == "lognormal":
            return math.exp(self.mu_ln + 0.5 * self.sigma_ln ** 2)
        return 0.0


@dataclass(frozen=True)
class RegressionConfig:
    n: int = 256
    contamination: Contamination = field(default_factory=Contamination)
    contaminated_fraction: float = 0.25
    noise_sigma: float = 0.5
    x_low: float = 0.0
    x_high: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("n must be >= 2")
        if not 0.0 <= self.contaminated_fraction <= 1.0:
            raise DomainError("contaminated_fraction must lie in [0, 1]")
        if not self.noise_sigma >= 0:
            raise DomainError("noise_sigma must be >= 0")
        if not self.x_high > self.x_low:
            raise DomainError("x range is empty")

    def with_(self, **changes):
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return RegressionConfig(**d)


def gen_regression(cfg):
    """Return (x, y, contaminated) for one realization."""
    rng = np.random.default_rng(cfg.seed)
    x = rng.uniform(cfg.x_low, cfg.x_high, cfg.n)
    noise = rng.normal(0.0, cfg.noise_sigma, cfg.n) if cfg.noise_sigma > 0 else np.zeros(cfg.n)
    n_bad = int(math.floor(cfg.contaminated_fraction * cfg.n))
    bad = np.zeros(cfg.n, dtype=bool)
    if cfg.contamination.kind != "none" and n_bad > 0:
        idx = rng.choice(cfg.n, size=n_bad, replace=False)
        bad[idx] = True
        contam = np.zeros(cfg.n)
        contam[idx] = cfg.contamination.draw(rng, n_bad)
    else:
        contam = np.zeros(cfg.n)
    y = SLOPE_TRUE * x + INTERCEPT_TRUE + noise + contam
    return x, y, bad


def emgm_init():
    return MixtureParams(EmgParams(0.0, 1.0, 1.0), 0.5)


def fit_line(x, y, method, opts=None):
    """Fit y ~ a x + b under ``method`` ('emgm' or a loss spec); return (a, b, result)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DomainError("x and y differ in length")
    adapter = LineAdapter(x)
    theta0 = adapter.from_line(1.0, 0.0)
    if isinstance(method, str) and method.lower() == "emgm":
        res = fit_emgm(y, adapter, (theta0, emgm_init()), opts)
    else:
        kind = method if isinstance(method, LossKind) else LossKind.parse(method)
        res = fit_loss(y, adapter, kind, theta0, opts)
    a, b = adapter.to_line(res.theta)
    return a, b, res


@dataclass
class TrialStats:
    method: str
    n: int
    reps: int
    mae_a: float
    mean_a: float
    std_a: float
    mae_b: float
    mean_b: float
    std_b: float


def _stats(method, n, err_a, err_b):
    err_a = np.asarray(err_a)
    err_b = np.asarray(err_b)
    ddof = 1 if err_a.size > 1 else 0
    return TrialStats(
        method=method, n=n, reps=int(err_a.size),
        mae_a=float(np.mean(np.abs(err_a))), mean_a=float(np.mean(err_a)),
        std_a=float(np.std(err_a, ddof=ddof)),
        mae_b=float(np.mean(np.abs(err_b))), mean_b=float(np.mean(err_b)),
        std_b=float(np.std(err_b, ddof=ddof)))


def trial_seed(master_seed, n, rep):
    """Seed for one realization, independent of run order."""
    return int(np.random.SeedSequence([master_seed, n, rep]).generate_state(1, np.uint64)[0])


@dataclass
class TrialTable:
    config: dict
    methods: list
    sizes: list
    reps: int
    master_seed: int
    stats: list = field(default_factory=list)
    records: list = field(default_factory=list)

    def get(self, method, n):
        for s in self.stats:
            if s.method == method and s.n == n:
                return s
        raise KeyError((method, n))

    def to_dict(self):
        return {
            "kind": "regression_trials",
            "config": self.config,
            "methods": list(self.methods),
            "sizes": list(self.sizes),
            "reps": self.reps,
            "master_seed": self.master_seed,
            "stats": [asdict(s) for s in self.stats],
            "records": self.records,
        }


def config_echo(cfg):
    d = asdict(cfg)
    d["slope_true"] = SLOPE_TRUE
    d["intercept_true"] = INTERCEPT_TRUE
    d["x_distribution"] = f"uniform({cfg.x_low}, {cfg.x_high})"
    d.pop("seed")
    d.pop("n")
    return d


def run_trials(cfg, methods, reps, sizes, master_seed, opts=None):
    """Fit every method on ``reps`` realizations per size.

    ``cfg`` supplies everything but n and seed. Each realization's seed is a
    function of (master_seed, n, rep) only, and aggregation is by index.
    """
    if reps < 2:
        raise DomainError("need at least two repetitions")
    methods = [str(m) for m in methods]
    table = TrialTable(config=config_echo(cfg), methods=methods, sizes=[int(s) for s in sizes],
                       reps=reps, master_seed=master_seed)
    for n in table.sizes:
        err = {m: np.empty((reps, 2)) for m in methods}
        for rep in range(reps):
            seed = trial_seed(master_seed, n, rep)
            x, y, _ = gen_regression(cfg.with_(n=n, seed=seed))
            for m in methods:
                a, b, res = fit_line(x, y, m, opts)
                err[m][rep] = (SLOPE_TRUE - a, INTERCEPT_TRUE - b)
                rec = {"n": n, "rep": rep, "seed": seed, "method": m, "a": a, "b": b,
                       "iterations": res.iterations, "converged": res.converged}
                if res.mix is not None:
                    rec.update(sigma=res.mix.emg.sigma, lam=res.mix.emg.lam,
                               epsilon=res.mix.epsilon)
                table.records.append(rec)
        for m in methods:
            table.stats.append(_stats(m, n, err[m][:, 0], err[m][:, 1]))
            logger.info("n=%d %s: mean_b=%.3e mae_b=%.3e", n, m, table.stats[-1].mean_b,
                        table.stats[-1].mae_b)
    return table


def mae_curve(cfg, methods, sizes, reps, master_seed, opts=None):
    """MAE of the intercept per size and method: {method: [mae_b per size]}."""
    table = run_trials(cfg, methods, reps, sizes, master_seed, opts)
    curve = {m: [table.get(m, n).mae_b for n in table.sizes] for m in table.methods}
    return table.sizes, curve, table


def loglog_slope(sizes, values):
    """Least-squares slope of log(values) against log(sizes)."""
    return float(np.polyfit(np.log(sizes), np.log(values), 1)[0])
