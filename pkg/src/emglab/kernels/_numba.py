"""numba-compiled kernels, scalar loops mirroring ``_numpy.py``."""
import math

import numpy as np
from numba import njit

from ._coeffs import (
    CODY_A, CODY_B, CODY_C, CODY_D, CODY_P, CODY_Q,
    INV_SQRT_PI, SQRT2, HALF_LOG_2PI, LOG2, ASYMPTOTIC_U, ERFCX_NEG_LIMIT,
    N_ROWS,
)

_A = CODY_A.copy()
_B = CODY_B.copy()
_C = CODY_C.copy()
_D = CODY_D.copy()
_P = CODY_P.copy()
_Q = CODY_Q.copy()


@njit(cache=True)
def _exp_square(y):
    ysq = math.trunc(y * 16.0) / 16.0
    delta = (y - ysq) * (y + ysq)
    return math.exp(ysq * ysq) * math.exp(delta)


@njit(cache=True)
def erfcx_scalar(t):
    y = abs(t)
    if y <= 0.5:
        ysq = y * y
        num = _A[4] * ysq
        den = ysq
        for i in range(3):
            num = (num + _A[i]) * ysq
            den = (den + _B[i]) * ysq
        res = _exp_square(y) * (1.0 - t * (num + _A[3]) / (den + _B[3]))
        return res
    if y <= 4.0:
        num = _C[8] * y
        den = y
        for i in range(7):
            num = (num + _C[i]) * y
            den = (den + _D[i]) * y
        res = (num + _C[7]) / (den + _D[7])
    else:
        ysq = 1.0 / (y * y)
        num = _P[5] * ysq
        den = ysq
        for i in range(4):
            num = (num + _P[i]) * ysq
            den = (den + _Q[i]) * ysq
        res = ysq * (num + _P[4]) / (den + _Q[4])
        res = (INV_SQRT_PI - res) / y
    if t < -0.5:
        if t < ERFCX_NEG_LIMIT:
            return np.inf
        res = 2.0 * _exp_square(t) - res
    return res


@njit(cache=True)
def erfcx(t):
    out = np.empty(t.size)
    for i in range(t.size):
        out[i] = erfcx_scalar(t[i])
    return out


@njit(cache=True)
def emg_terms(r, sigma, lam, want_derivs):
    n = r.size
    nrows = N_ROWS if want_derivs else 2
    out = np.empty((nrows, n))
    s = sigma
    s2 = s * s
    log_s = math.log(s)
    log_half_lam = math.log(lam) - LOG2
    ls = lam * s
    for i in range(n):
        ri = r[i]
        z = ri / s
        out[0, i] = HALF_LOG_2PI + log_s + 0.5 * z * z
        u = (ls - z) / SQRT2
        ex = erfcx_scalar(u)
        if u > 0.0:
            out[1, i] = -(log_half_lam - 0.5 * z * z + math.log(ex))
        else:
            erfc_u = 2.0 - erfcx_scalar(-u) * math.exp(-u * u)
            out[1, i] = -(log_half_lam + 0.5 * ls * ls - lam * ri
                          + math.log(erfc_u))
        if not want_derivs:
            continue

        if u > ASYMPTOTIC_U:
            w = 1.0 / (u * u)
            g = -(1.0 - w + 2.5 * w * w) / u
            c = 2.0 - w + 3.0 * w * w
        else:
            q = 2.0 * INV_SQRT_PI / ex
            g = 2.0 * u - q
            c = -g * q
        gp = 2.0 - c
        out[2, i] = -ri / s2
        out[3, i] = 1.0 / s2
        out[4, i] = 1.0 / s - ri * ri / (s2 * s)
        out[5, i] = -1.0 / s2 + 3.0 * ri * ri / (s2 * s2)
        u_s = lam / SQRT2 + ri / (SQRT2 * s2)
        u_ss = -SQRT2 * ri / (s2 * s)
        out[6, i] = -ri / s2 - g / (SQRT2 * s)
        out[7, i] = c / (2.0 * s2)
        out[8, i] = -ri * ri / (s2 * s) - g * u_s
        out[9, i] = 3.0 * ri * ri / (s2 * s2) - gp * u_s * u_s - g * u_ss
        out[10, i] = -1.0 / lam - g * s / SQRT2
        out[11, i] = 1.0 / (lam * lam) - gp * s2 / 2.0
    return out
