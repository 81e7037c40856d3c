"""Concrete models for the EM engine and the loss fitters."""
import numpy as np

from .em import ModelAdapter
from .errors import ContractError, FitError


class IdentityAdapter(ModelAdapter):
    """One free location per datum, M(theta) = theta."""

    def __init__(self, n):
        self.n_data = n

    def predict(self, theta):
        return np.asarray(theta, dtype=np.float64)

    def grad_accumulate(self, theta, w):
        return np.asarray(w, dtype=np.float64)

    def curvature_accumulate(self, theta, h):
        return np.asarray(h, dtype=np.float64)


class ConstantAdapter(ModelAdapter):
    """A single shared location, M_i(theta) = theta[0]."""

    def __init__(self, n):
        self.n_data = n

    def predict(self, theta):
        return np.full(self.n_data, theta[0])

    def grad_accumulate(self, theta, w):
        return np.array([np.sum(w)])

    def curvature_accumulate(self, theta, h):
        return np.array([np.sum(h)])


class LineAdapter(ModelAdapter):
    """M_i = a x_i + b, parameterized internally about the mean of ``x``.

    ``theta = (a, c)`` with c = b + a * mean(x); the centering makes the
    diagonal curvature nearly exact. Use ``to_line``/``from_line`` to convert.
    """

    def __init__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.size < 2:
            raise ContractError("need at least two abscissae")
        self.center = float(np.mean(x))
        self.xc = x - self.center
        if not np.any(self.xc != 0.0):
            raise FitError("abscissae have zero variance")
        self.n_data = x.size

    def from_line(self, a, b):
        return np.array([a, b + a * self.center])

    def to_line(self, theta):
        a, c = theta
        return float(a), float(c - a * self.center)

    def predict(self, theta):
        return theta[0] * self.xc + theta[1]

    def grad_accumulate(self, theta, w):
        return np.array([w @ self.xc, np.sum(w)])

    def curvature_accumulate(self, theta, h):
        return np.array([h @ (self.xc * self.xc), np.sum(h)])


class LowRankAdapter(ModelAdapter):
    """M = (U V)[mask] with the columns of U confined to span(W).

    theta packs the r x k coefficient matrix C (U = W C) followed by the
    k x m activation matrix V. Steps on U are therefore taken in the basis W
    and are feasible by construction; ``project`` re-applies U <- W (W^T U)
    and optionally clips V at zero.
    """

    def __init__(self, W, mask, k, nonneg_v=False):
        self.W = np.ascontiguousarray(W, dtype=np.float64)
        self.mask = np.asarray(mask, dtype=bool)
        n, m = self.mask.shape
        if self.W.shape[0] != n:
            raise ContractError(f"basis has {self.W.shape[0]} rows, data has {n}")
        self.k = int(k)
        self.r = self.W.shape[1]
        self.n, self.m = n, m
        self.nonneg_v = nonneg_v
        self.n_data = int(self.mask.sum())
        self._n_c = self.r * self.k
        self._w2 = self.W * self.W
        self._full = self.mask.all()

    def pack(self, C, V):
        return np.concatenate([np.ravel(C), np.ravel(V)])

    def unpack(self, theta):
        C = theta[:self._n_c].reshape(self.r, self.k)
        V = theta[self._n_c:].reshape(self.k, self.m)
        return C, V

    def factors(self, theta):
        C, V = self.unpack(theta)
        return self.W @ C, V

    def predict(self, theta):
        U, V = self.factors(theta)
        B = U @ V
        return B.ravel() if self._full else B[self.mask]

    def _scatter(self, w):
        if self._full:
            return np.asarray(w).reshape(self.n, self.m)
        out = np.zeros((self.n, self.m))
        out[self.mask] = w
        return out

    def grad_accumulate(self, theta, w):
        U, V = self.factors(theta)
        G = self._scatter(w)
        gc = self.W.T @ (G @ V.T)
        gv = U.T @ G
        return self.pack(gc, gv)

    def curvature_accumulate(self, theta, h):
        U, V = self.factors(theta)
        H = self._scatter(h)
        cc = self._w2.T @ (H @ (V * V).T)
        cv = (U * U).T @ H
        return self.pack(cc, cv)

    def project(self, theta):
        if not self.nonneg_v:
            return theta
        C, V = self.unpack(theta)
        return self.pack(C, np.maximum(V, 0.0))

    def blocks(self, theta):
        idx = np.arange(theta.size)
        return [idx[:self._n_c], idx[self._n_c:]]
