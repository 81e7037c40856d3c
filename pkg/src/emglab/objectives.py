"""Baseline residual losses (l2, l1, Huber, pinball) and a generic fitter.

The fitter shares ``scaled_descent`` with the EM engine. Non-smooth losses
are minimized through a version whose kinks are capped by a quadratic of
half-width ``eta``; reported objective values use the exact definitions.
"""
from dataclasses import dataclass

import numpy as np

from .em import FitOptions, FitResult, _BlockObjective, scaled_descent
from .errors import DomainError


@dataclass(frozen=True)
class LossKind:
    name: str
    param: float = None

    def __post_init__(self):
        if self.name not in ("l2", "l1", "huber", "pinball"):
            raise DomainError(f"unknown loss {self.name!r}")
        if self.name == "huber" and not (self.param is not None and self.param > 0):
            raise DomainError("Huber loss needs delta > 0")
        if self.name == "pinball" and not (self.param is not None and 0 < self.param < 1):
            raise DomainError("pinball loss needs 0 < q < 1")

    @classmethod
    def l2(cls):
        return cls("l2")

    @classmethod
    def l1(cls):
        return cls("l1")

    @classmethod
    def huber(cls, delta):
        return cls("huber", float(delta))

    @classmethod
    def pinball(cls, q):
        return cls("pinball", float(q))

    @classmethod
    def parse(cls, text):
        """Parse ``l2``, ``l1``, ``huber:0.2`` or ``pinball:0.3``."""
        name, _, arg = text.strip().lower().partition(":")
        aliases = {"quantile": "pinball", "quant": "pinball"}
        name = aliases.get(name, name)
        if name in ("huber", "pinball"):
            if not arg:
                raise DomainError(f"{name} needs a parameter, e.g. {name}:0.2")
            return cls(name, float(arg))
        if arg:
            raise DomainError(f"{name} takes no parameter")
        return cls(name)

    def __str__(self):
        return self.name if self.param is None else f"{self.name}:{self.param:g}"


def loss_eval(kind, r, eta=1e-6):
    """Exact loss value, a subgradient, and a positive curvature surrogate.

    Derivatives are with respect to the residual ``r``. The surrogate is the
    curvature of the tightest quadratic majorizer at ``r`` with |r| floored
    at ``eta``, which turns scaled descent into an IRLS-like step.
    """
    r = np.asarray(r, dtype=np.float64)
    a = np.abs(r)
    if kind.name == "l2":
        return 0.5 * r * r, r.copy(), np.ones_like(r)
    if kind.name == "l1":
        return a, np.sign(r), 1.0 / np.maximum(a, eta)
    if kind.name == "huber":
        d = kind.param
        inside = a <= d
        val = np.where(inside, 0.5 * r * r, d * (a - 0.5 * d))
        return val, np.clip(r, -d, d), np.where(inside, 1.0, d / np.maximum(a, eta))
    q = kind.param
    val = np.where(r >= 0, q * r, (q - 1.0) * r)
    sub = np.where(r > 0, q, np.where(r < 0, q - 1.0, 0.0))
    return val, sub, 0.5 / np.maximum(a, eta)


def smoothed_loss(kind, r, eta):
    """Loss with kinks capped by a quadratic of half-width eta, and its slope."""
    r = np.asarray(r, dtype=np.float64)
    if kind.name in ("l2", "huber"):
        val, grad, _ = loss_eval(kind, r, eta)
        return val, grad
    a = np.abs(r)
    inside = a <= eta
    abs_s = np.where(inside, 0.5 * r * r / eta + 0.5 * eta, a)
    abs_g = np.where(inside, r / eta, np.sign(r))
    if kind.name == "l1":
        return abs_s, abs_g
    q = kind.param
    return 0.5 * abs_s + (q - 0.5) * r, 0.5 * abs_g + (q - 0.5)


def default_eta(data):
    scale = float(np.std(data)) if np.size(data) > 1 else 0.0
    return 1e-6 * (scale if scale > 0 else 1.0)


def total_loss(kind, data, preds):
    return float(np.sum(loss_eval(kind, np.asarray(data) - preds)[0]))


def fit_loss(data, adapter, kind, theta0, opts=None, eta=None):
    """Minimize sum_i loss(D_i - M_i(theta)) by block-wise scaled descent."""
    opts = opts or FitOptions()
    data = np.asarray(data, dtype=np.float64)
    eta = default_eta(data) if eta is None else eta

    def pointwise(preds):
        r = data - preds
        val, grad = smoothed_loss(kind, r, eta)
        _, _, curv = loss_eval(kind, r, eta)
        # derivatives with respect to the location are -d/dr
        return float(np.sum(val)), -grad, curv

    theta = np.array(theta0, dtype=np.float64)
    f = pointwise(adapter.predict(theta))[0]
    trace = [f]
    converged = False
    it = 0
    for it in range(1, opts.max_em_iters + 1):
        for block in adapter.blocks(theta):
            obj = _BlockObjective(adapter, theta, block, pointwise)
            res = scaled_descent(obj, theta[block], obj.curvature, opts, project=obj.project)
            theta = obj.full(res.x)
        f_new = pointwise(adapter.predict(theta))[0]
        trace.append(f_new)
        if f - f_new <= opts.loglik_rel_tol * abs(f_new):
            converged = True
            break
        f = f_new
    return FitResult(theta=theta, trace=np.array(trace), iterations=it, converged=converged,
                     objective=total_loss(kind, data, adapter.predict(theta)))
