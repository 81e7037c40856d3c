"""Low-rank background estimation for spectroscopic data.

The background of a dataset S (n channels x m spectrograms) is modeled as
B = U V with the columns of U restricted to the dominant eigenspace W of an
RBF kernel matrix on the channel grid. The factors are fitted under one of
the baseline losses or under the EMG mixture.
"""
from dataclasses import dataclass, field, asdict
import functools
import logging
import math

import numpy as np

from .adapters import LowRankAdapter
from .density import EmgParams, MixtureParams
from .em import FitOptions, ModelAdapter, fit_emgm
from .errors import ContractError, DomainError, FitError
from .objectives import LossKind, fit_loss

logger = logging.getLogger(__name__)


@dataclass
class SpectroDataset:
    grid: np.ndarray
    S: np.ndarray
    mask: np.ndarray = None
    truth_B: np.ndarray = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.float64)
        self.S = np.asarray(self.S, dtype=np.float64)
        if self.S.ndim != 2 or self.S.shape[0] < 1 or self.S.shape[1] < 1:
            raise ContractError(f"S must be a non-empty matrix, got shape {self.S.shape}")
        if self.grid.shape != (self.S.shape[0],):
            raise ContractError(f"grid of length {self.grid.size} for {self.S.shape[0]} rows")
        if self.mask is None:
            self.mask = np.isfinite(self.S)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.S.shape:
            raise ContractError("mask and S differ in shape")
        if not np.all(np.isfinite(self.S[self.mask])):
            raise ContractError("S has non-finite observed entries")
        if self.truth_B is not None:
            self.truth_B = np.asarray(self.truth_B, dtype=np.float64)
            if self.truth_B.shape != self.S.shape:
                raise ContractError("truth_B and S differ in shape")

    @property
    def shape(self):
        return self.S.shape


@dataclass
class LowRankModel:
    U: np.ndarray
    V: np.ndarray
    W: np.ndarray

    @property
    def B(self):
        return self.U @ self.V


def rbf_kernel(grid, lengthscale):
    if not lengthscale > 0:
        raise DomainError(f"lengthscale must be positive, got {lengthscale!r}")
    g = np.asarray(grid, dtype=np.float64)
    d = g[:, None] - g[None, :]
    return np.exp(-(d * d) / (2.0 * lengthscale ** 2))


def rkhs_projector(K, tol=1e-6):
    """Orthonormal eigenvectors of K with eigenvalue > tol * largest eigenvalue."""
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ContractError("kernel matrix must be square")
    if not 0 < tol < 1:
        raise DomainError("tol must lie in (0, 1)")
    scale = np.max(np.abs(K)) if K.size else 0.0
    if not np.allclose(K, K.T, rtol=0.0, atol=1e-12 * max(scale, 1.0)):
        raise ContractError("kernel matrix is not symmetric")
    evals, evecs = np.linalg.eigh(0.5 * (K + K.T))
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    keep = evals > tol * evals[0]
    W = evecs[:, order[keep]]
    # deterministic sign: largest-magnitude entry of each column positive
    flip = np.sign(W[np.argmax(np.abs(W), axis=0), np.arange(W.shape[1])])
    return W * flip


@functools.lru_cache(maxsize=8)
def _cached_basis(grid_bytes, n, lengthscale, tol):
    grid = np.frombuffer(grid_bytes, dtype=np.float64, count=n)
    W = rkhs_projector(rbf_kernel(grid, lengthscale), tol)
    W.setflags(write=False)
    return W


def kernel_basis(grid, lengthscale=5.0, tol=1e-6):
    """Cached ``rkhs_projector(rbf_kernel(grid, lengthscale), tol)``."""
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    return _cached_basis(grid.tobytes(), grid.size, float(lengthscale), float(tol))


def project_columns(W, U):
    """U' = W (W^T U); idempotent when W has orthonormal columns."""
    W = np.asarray(W)
    U = np.asarray(U)
    if U.ndim == 1:
        U = U[:, None]
    if W.shape[0] != U.shape[0]:
        raise ContractError(f"W has {W.shape[0]} rows, U has {U.shape[0]}")
    return W @ (W.T @ U)


@dataclass(frozen=True)
class SpectraGenConfig:
    n: int = 1024
    m: int = 64
    k: int = 2
    peaks_min: int = 50
    peaks_max: int = 80
    # Gaussian peak standard deviation in channels
    width_min: float = 2.0
    width_max: float = 8.0
    # "exp" (exponential amplitudes) or "uniform"
    amplitude: str = "exp"
    amplitude_mean: float = 1.0
    # fraction of peaks drawn as Lorentzians instead of Gaussians
    lorentzian_fraction: float = 0.0
    # peak signal relative to the background, after per-column max scaling
    peak_scale: float = 1.0
    noise_sigma: float = 0.01
    lengthscale: float = 5.0
    background_lengthscale: float = 80.0
    rank_tol: float = 1e-6
    mask_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.m < 1 or self.k < 1:
            raise DomainError("need n >= 2, m >= 1, k >= 1")
        if not 0 <= self.peaks_min <= self.peaks_max:
            raise DomainError("peak count range is invalid")
        if not 0 < self.width_min <= self.width_max:
            raise DomainError("peak width range is invalid")
        if self.amplitude not in ("exp", "uniform"):
            raise DomainError(f"unknown amplitude distribution {self.amplitude!r}")
        if not self.amplitude_mean > 0 or not self.peak_scale >= 0:
            raise DomainError("amplitude scales must be positive")
        if not self.noise_sigma >= 0:
            raise DomainError("noise_sigma must be >= 0")
        if not 0 <= self.mask_fraction < 1:
            raise DomainError("mask_fraction must lie in [0, 1)")
        if not 0 <= self.lorentzian_fraction <= 1:
            raise DomainError("lorentzian_fraction must lie in [0, 1]")
        if not (self.lengthscale > 0 and self.background_lengthscale > 0):
            raise DomainError("lengthscales must be positive")

    def with_(self, **changes):
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return SpectraGenConfig(**d)


def draw_amplitudes(rng, cfg, size):
    if cfg.amplitude == "exp":
        return rng.exponential(cfg.amplitude_mean, size)
    return rng.uniform(0.0, 2.0 * cfg.amplitude_mean, size)


def _background_components(rng, cfg, grid, W):
    # broad positive bumps on a positive floor, then pushed into span(W)
    n = grid.size
    span = grid[-1] - grid[0]
    comps = np.empty((n, cfg.k))
    for j in range(cfg.k):
        nb = rng.integers(2, 6)
        centers = rng.uniform(grid[0] - 0.1 * span, grid[-1] + 0.1 * span, nb)
        widths = cfg.background_lengthscale * rng.uniform(1.0, 3.0, nb)
        heights = rng.uniform(0.2, 1.0, nb)
        raw = 0.3 * np.ones(n)
        for c, w, h in zip(centers, widths, heights):
            raw += h * np.exp(-0.5 * ((grid - c) / w) ** 2)
        comps[:, j] = raw
    comps = project_columns(W, comps)
    return comps / np.max(comps, axis=0)


def _peak_train(rng, cfg, grid):
    count = rng.integers(cfg.peaks_min, cfg.peaks_max + 1)
    out = np.zeros(grid.size)
    if count == 0:
        return out, np.empty(0)
    centers = rng.uniform(grid[0], grid[-1], count)
    widths = rng.uniform(cfg.width_min, cfg.width_max, count)
    amps = draw_amplitudes(rng, cfg, count)
    lorentz = rng.uniform(size=count) < cfg.lorentzian_fraction
    for c, w, a, lz in zip(centers, widths, amps, lorentz):
        d = (grid - c) / w
        out += a * (1.0 / (1.0 + d * d) if lz else np.exp(-0.5 * d * d))
    return out, amps


def gen_spectra(cfg):
    """Synthetic dataset S = B* + peaks + noise with B* = U* V* of rank k.

    Each clean column (background plus peaks) is scaled to maximum 1 before
    noise is added; truth_B carries the same scaling.
    """
    rng = np.random.default_rng(cfg.seed)
    grid = np.arange(cfg.n, dtype=np.float64)
    W = kernel_basis(grid, cfg.lengthscale, cfg.rank_tol)
    U = _background_components(rng, cfg, grid, W)
    V = rng.uniform(0.2, 1.0, (cfg.k, cfg.m))
    B = U @ V
    B /= np.max(B, axis=0)
    P = np.empty((cfg.n, cfg.m))
    for j in range(cfg.m):
        P[:, j] = _peak_train(rng, cfg, grid)[0]
    P *= cfg.peak_scale
    col_max = np.max(B + P, axis=0)
    B /= col_max
    P /= col_max
    noise = rng.normal(0.0, cfg.noise_sigma, (cfg.n, cfg.m)) if cfg.noise_sigma > 0 else 0.0
    S = B + P + noise
    mask = np.ones_like(S, dtype=bool)
    if cfg.mask_fraction > 0:
        mask = rng.uniform(size=S.shape) >= cfg.mask_fraction
    return SpectroDataset(grid=grid, S=S, mask=mask, truth_B=B)


class _NoParams(ModelAdapter):
    """Zero locations with nothing to fit; used to fit the residual model alone."""

    def __init__(self, n):
        self.n_data = n

    def predict(self, theta):
        return np.zeros(self.n_data)

    def grad_accumulate(self, theta, w):
        return np.zeros(0)

    def curvature_accumulate(self, theta, h):
        return np.zeros(0)

    def blocks(self, theta):
        return []


def residual_mle(resid, opts, sigma_prior_scale=0.0):
    """EMGM (sigma, lambda, epsilon) maximizing the likelihood of fixed residuals."""
    resid = np.asarray(resid, dtype=np.float64)
    neg = resid[resid <= 0]
    sigma0 = math.sqrt(np.mean(neg * neg)) if neg.size else float(np.std(resid))
    sigma0 = max(sigma0, 1e-6 * max(float(np.max(np.abs(resid))), 1e-300), 1e-12)
    pos = resid[resid > sigma0]
    lam0 = 1.0 / max(float(np.mean(pos)) if pos.size else sigma0, 1e-12)
    init = MixtureParams(EmgParams(0.0, sigma0, lam0), 0.5)
    res = fit_emgm(resid, _NoParams(resid.size), (np.zeros(0), init),
                   _with_prior(opts, sigma_prior_scale))
    return res.mix


def _with_prior(opts, scale):
    d = {f: getattr(opts, f) for f in opts.__dataclass_fields__}
    d["sigma_prior_scale"] = scale
    return FitOptions(**d)


def init_factors(adapter, k, m, seed):
    """U = W (W^T R_U), V = R_V with R_U, R_V ~ U(0, 1)."""
    rng = np.random.default_rng(seed)
    R_U = rng.uniform(0.0, 1.0, (adapter.n, k))
    R_V = rng.uniform(0.0, 1.0, (k, m))
    return adapter.pack(adapter.W.T @ R_U, R_V)


def default_prior_scale(ds):
    col_max = [np.max(ds.S[ds.mask[:, j], j]) for j in range(ds.S.shape[1]) if ds.mask[:, j].any()]
    return 0.1 * float(np.mean(col_max))


def fit_background(ds, k, objective, opts=None, lengthscale=5.0, tol=1e-6, seed=0,
                   sigma_prior_scale=None, nonneg_v=False, init_quantile=0.3):
    """Fit B = U V to ``ds`` under ``objective`` ('emgm' or a loss spec).

    Returns (LowRankModel, FitResult). The EMGM path first runs a pinball
    factorization at ``init_quantile``, fits the residual model to its
    residuals, and then runs GEM from there.
    """
    opts = opts or FitOptions()
    n, m = ds.shape
    if k < 1:
        raise DomainError("k must be >= 1")
    n_obs = int(ds.mask.sum())
    if n_obs < k * (n + m):
        raise FitError(f"{n_obs} observed entries cannot determine a rank-{k} factorization")
    W = kernel_basis(ds.grid, lengthscale, tol)
    adapter = LowRankAdapter(W, ds.mask, k, nonneg_v=nonneg_v)
    data = ds.S[ds.mask]
    theta0 = init_factors(adapter, k, m, seed)

    is_emgm = isinstance(objective, str) and objective.lower() == "emgm"
    if is_emgm:
        qres = fit_loss(data, adapter, LossKind.pinball(init_quantile), theta0, opts)
        prior = default_prior_scale(ds) if sigma_prior_scale is None else sigma_prior_scale
        resid = data - adapter.predict(qres.theta)
        mix = residual_mle(resid, opts, prior)
        res = fit_emgm(data, adapter, (qres.theta, mix), _with_prior(opts, prior))
    else:
        kind = objective if isinstance(objective, LossKind) else LossKind.parse(objective)
        res = fit_loss(data, adapter, kind, theta0, opts)
    U, V = adapter.factors(res.theta)
    return LowRankModel(U=project_columns(W, U), V=V, W=W), res


def imodpoly(y, degree, max_iter=200, grid=None, rel_tol=1e-6):
    """Iterative modified polynomial baseline.

    Each pass fits a least-squares polynomial to the working spectrum,
    estimates the noise level as the residual standard deviation over the
    points not flagged as peaks, and clips the working spectrum at
    fit + noise. Points above fit + noise after the first pass are dropped
    from later fits.
    """
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    if degree < 0:
        raise DomainError("degree must be >= 0")
    if degree >= n:
        raise ContractError(f"degree {degree} needs more than {n} points")
    x = np.arange(n, dtype=np.float64) if grid is None else np.asarray(grid, dtype=np.float64)
    # map to [-1, 1] for conditioning
    lo, hi = x.min(), x.max()
    t = (2.0 * x - (lo + hi)) / (hi - lo) if hi > lo else np.zeros(n)
    basis = np.polynomial.legendre.legvander(t, degree)

    def polyfit(idx, target):
        coef, *_ = np.linalg.lstsq(basis[idx], target[idx], rcond=None)
        return basis @ coef

    work = y.copy()
    keep = np.ones(n, dtype=bool)
    fit = polyfit(keep, work)
    dev = float(np.std((work - fit)[keep]))
    for it in range(max_iter):
        if it == 0:
            keep = work <= fit + dev
            if keep.sum() <= degree:
                keep[:] = True
        work = np.minimum(work, fit + dev)
        fit = polyfit(keep, work)
        new_dev = float(np.std((work - fit)[keep]))
        if abs(new_dev - dev) <= rel_tol * max(new_dev, 1e-300):
            dev = new_dev
            break
        dev = new_dev
    return fit


def background_errors(B_hat, truth_B):
    """(mean_l2, std_l2, mean_l1, std_l1) of per-column normalized error norms."""
    e2, e1 = column_errors(B_hat, truth_B)
    return float(np.mean(e2)), float(np.std(e2)), float(np.mean(e1)), float(np.std(e1))


def column_errors(B_hat, truth_B):
    B_hat = np.asarray(B_hat, dtype=np.float64)
    truth_B = np.asarray(truth_B, dtype=np.float64)
    if B_hat.ndim == 1:
        B_hat = B_hat[:, None]
    if truth_B.ndim == 1:
        truth_B = truth_B[:, None]
    if B_hat.shape != truth_B.shape:
        raise ContractError(f"estimate {B_hat.shape} and truth {truth_B.shape} differ")
    n = B_hat.shape[0]
    d = B_hat - truth_B
    return np.sqrt(np.sum(d * d, axis=0) / n), np.sum(np.abs(d), axis=0) / n


def pmf_bench_options():
    """Iteration caps used by the PMF benchmarks (looser than the defaults)."""
    return FitOptions(max_em_iters=200, max_inner_iters=10, loglik_rel_tol=1e-6)


def dataset_seed(master_seed, index):
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1, np.uint64)[0])


@dataclass
class PmfBench:
    config: dict
    objectives: list
    n_datasets: int
    master_seed: int
    # objective -> pooled (mean_l2, std_l2, mean_l1, std_l1)
    stats: dict = field(default_factory=dict)
    records: list = field(default_factory=list)

    def mean_l2(self, objective):
        return self.stats[objective]["mean_l2"]

    def to_dict(self):
        return {"kind": "pmf_bench", "config": self.config, "objectives": self.objectives,
                "n_datasets": self.n_datasets, "master_seed": self.master_seed,
                "stats": self.stats, "records": self.records}


def run_pmf_bench(gen_cfg, objectives, n_datasets, master_seed, opts=None, k=None,
                  lengthscale=None, tol=None):
    """Fit every objective on ``n_datasets`` synthetic datasets.

    Dataset i uses seed ``dataset_seed(master_seed, i)``; its factor
    initialization uses the same seed, so every objective starts from the
    same point. Errors are pooled over all spectrograms of all datasets.
    """
    opts = opts or pmf_bench_options()
    k = gen_cfg.k if k is None else k
    lengthscale = gen_cfg.lengthscale if lengthscale is None else lengthscale
    tol = gen_cfg.rank_tol if tol is None else tol
    objectives = [str(o) for o in objectives]
    cfg_echo = asdict(gen_cfg)
    cfg_echo.pop("seed")
    cfg_echo.update(fit_k=k, fit_lengthscale=lengthscale, fit_tol=tol, fit_options=asdict(opts))
    bench = PmfBench(config=cfg_echo, objectives=objectives, n_datasets=n_datasets,
                     master_seed=master_seed)
    pooled = {o: ([], []) for o in objectives}
    for i in range(n_datasets):
        seed = dataset_seed(master_seed, i)
        ds = gen_spectra(gen_cfg.with_(seed=seed))
        for obj in objectives:
            model, res = fit_background(ds, k, obj, opts, lengthscale=lengthscale, tol=tol, seed=seed)
            e2, e1 = column_errors(model.B, ds.truth_B)
            pooled[obj][0].append(e2)
            pooled[obj][1].append(e1)
            rec = {"dataset": i, "seed": seed, "objective": obj,
                   "mean_l2": float(np.mean(e2)), "mean_l1": float(np.mean(e1)),
                   "iterations": res.iterations, "converged": res.converged}
            if res.mix is not None:
                rec.update(sigma=res.mix.emg.sigma, lam=res.mix.emg.lam, epsilon=res.mix.epsilon)
            bench.records.append(rec)
            logger.info("dataset %d %s: mean_l2=%.4e", i, obj, rec["mean_l2"])
    for obj in objectives:
        e2 = np.concatenate(pooled[obj][0])
        e1 = np.concatenate(pooled[obj][1])
        bench.stats[obj] = {"mean_l2": float(np.mean(e2)), "std_l2": float(np.std(e2)),
                            "mean_l1": float(np.mean(e1)), "std_l1": float(np.std(e1))}
    return bench
