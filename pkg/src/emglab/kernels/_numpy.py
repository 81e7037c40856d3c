"""Vectorized numpy kernels.

Reference path for the numba kernels in ``_numba.py``; both implement the
same formulas branch for branch and are checked against each other in the
test suite.
"""
import numpy as np

from ._coeffs import (
    CODY_A, CODY_B, CODY_C, CODY_D, CODY_P, CODY_Q,
    INV_SQRT_PI, SQRT2, HALF_LOG_2PI, LOG2, ASYMPTOTIC_U, ERFCX_NEG_LIMIT,
    N_ROWS,
)


def _poly_ratio_small(ysq):
    # erf(x) / x on |x| <= 0.5
    num = CODY_A[4] * ysq
    den = ysq
    for i in range(3):
        num = (num + CODY_A[i]) * ysq
        den = (den + CODY_B[i]) * ysq
    return (num + CODY_A[3]) / (den + CODY_B[3])


def _erfcx_mid(y):
    # erfcx(y) on 0.5 < y <= 4
    num = CODY_C[8] * y
    den = y
    for i in range(7):
        num = (num + CODY_C[i]) * y
        den = (den + CODY_D[i]) * y
    return (num + CODY_C[7]) / (den + CODY_D[7])


def _erfcx_large(y):
    # erfcx(y) on y > 4; y*y may overflow to inf, giving ysq = 0 as wanted
    with np.errstate(over="ignore"):
        ysq = 1.0 / (y * y)
    num = CODY_P[5] * ysq
    den = ysq
    for i in range(4):
        num = (num + CODY_P[i]) * ysq
        den = (den + CODY_Q[i]) * ysq
    res = ysq * (num + CODY_P[4]) / (den + CODY_Q[4])
    return (INV_SQRT_PI - res) / y


def _exp_square(y):
    # exp(y*y) with the squaring error split off
    ysq = np.trunc(y * 16.0) / 16.0
    delta = (y - ysq) * (y + ysq)
    with np.errstate(over="ignore"):
        return np.exp(ysq * ysq) * np.exp(delta)


def erfcx(t):
    t = np.asarray(t, dtype=np.float64)
    y = np.abs(t)
    out = np.empty_like(y)

    small = y <= 0.5
    mid = (y > 0.5) & (y <= 4.0)
    large = y > 4.0

    ys = y[small]
    erf_small = t[small] * _poly_ratio_small(ys * ys)
    out[small] = _exp_square(ys) * (1.0 - erf_small)

    out[mid] = _erfcx_mid(y[mid])
    out[large] = _erfcx_large(y[large])

    neg = (t < -0.5)
    if np.any(neg):
        tn = t[neg]
        with np.errstate(over="ignore"):   # inf below the limit is the answer
            twice = 2.0 * _exp_square(tn)
        res = twice - out[neg]
        res[tn < ERFCX_NEG_LIMIT] = np.inf
        out[neg] = res
    return out


def _log_erfcx_slope(u, ex):
    """Return (g, c) with g = d/du log erfcx(u) and c = 2 - dg/du."""
    g = np.empty_like(u)
    c = np.empty_like(u)
    big = u > ASYMPTOTIC_U
    w = 1.0 / (u[big] * u[big])
    g[big] = -(1.0 - w + 2.5 * w * w) / u[big]
    c[big] = 2.0 - w + 3.0 * w * w
    rest = ~big
    q = 2.0 * INV_SQRT_PI / ex[rest]
    gr = 2.0 * u[rest] - q
    g[rest] = gr
    c[rest] = -gr * q
    return g, c


def emg_terms(r, sigma, lam, want_derivs):
    """Per-datum Gaussian and EMG negative log densities of residuals ``r``.

    Returns a (nrows, len(r)) array. Rows 0-1 are -log N and -log EMG. With
    ``want_derivs`` the rows continue with, for the Gaussian and the EMG in
    turn: d/dmu, d2/dmu2, d/dsigma, d2/dsigma2, and for the EMG only
    d/dlambda, d2/dlambda2 (mu being the location, r = x - mu).
    """
    r = np.asarray(r, dtype=np.float64)
    s = sigma
    nrows = N_ROWS if want_derivs else 2
    out = np.empty((nrows, r.size))
    z = r / s
    out[0] = HALF_LOG_2PI + np.log(s) + 0.5 * z * z

    u = (lam * s - z) / SQRT2
    pos = u > 0.0
    ex = erfcx(u)
    neg_log = np.empty_like(r)
    # u > 0: log(lam/2) - z^2/2 + log erfcx(u)
    neg_log[pos] = -(np.log(lam) - LOG2 - 0.5 * z[pos] ** 2 + np.log(ex[pos]))
    # u <= 0: direct form, erfc(u) = 2 - erfcx(-u) exp(-u^2)
    un = u[~pos]
    erfc_u = 2.0 - erfcx(-un) * np.exp(-un * un)
    neg_log[~pos] = -(np.log(lam) - LOG2 + 0.5 * (lam * s) ** 2 - lam * r[~pos]
                      + np.log(erfc_u))
    out[1] = neg_log
    if not want_derivs:
        return out

    g, c = _log_erfcx_slope(u, ex)
    s2 = s * s
    # Gaussian
    out[2] = -r / s2
    out[3] = 1.0 / s2
    out[4] = 1.0 / s - r * r / (s2 * s)
    out[5] = -1.0 / s2 + 3.0 * r * r / (s2 * s2)
    # EMG, chain rule through u = lam*s/sqrt2 - r/(sqrt2*s)
    u_s = lam / SQRT2 + r / (SQRT2 * s2)
    u_ss = -SQRT2 * r / (s2 * s)
    gp = 2.0 - c
    out[6] = -r / s2 - g / (SQRT2 * s)
    out[7] = c / (2.0 * s2)
    out[8] = -r * r / (s2 * s) - g * u_s
    out[9] = 3.0 * r * r / (s2 * s2) - gp * u_s * u_s - g * u_ss
    out[10] = -1.0 / lam - g * s / SQRT2
    out[11] = 1.0 / (lam * lam) - gp * s2 / 2.0
    return out
