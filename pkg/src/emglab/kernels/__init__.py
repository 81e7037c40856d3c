"""Hot elementwise kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import from ``EMGLAB_BACKEND`` (``numba`` or
``numpy``). Without the variable, numba is used when it imports cleanly.
"""
import logging
import os

import numpy as np

from . import _numpy
from ._coeffs import (  # noqa: F401
    NLN, NLE, N_MU, N_MUMU, N_S, N_SS, E_MU, E_MUMU, E_S, E_SS, E_L, E_LL,
    N_ROWS,
)

logger = logging.getLogger(__name__)

_requested = os.environ.get("EMGLAB_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ImportError(f"EMGLAB_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

_jit = None
if _requested in ("", "numba"):
    try:
        from . import _numba as _jit
    except ImportError:
        if _requested == "numba":
            raise
        logger.info("numba unavailable, using numpy kernels")

BACKEND = "numba" if _jit is not None else "numpy"


def numba_available():
    return _jit is not None


def _impl(backend):
    backend = backend or BACKEND
    if backend == "numba":
        if _jit is None:
            raise RuntimeError("numba backend requested but not loaded")
        return _jit
    if backend == "numpy":
        return _numpy
    raise ValueError(f"unknown backend {backend!r}")


def erfcx(t, backend=None):
    """Scaled complementary error function exp(t^2) erfc(t), elementwise."""
    t = np.asarray(t, dtype=np.float64)
    flat = np.ascontiguousarray(t.reshape(-1))
    out = _impl(backend).erfcx(flat)
    return out.reshape(t.shape)


def emg_terms(r, sigma, lam, want_derivs=False, backend=None):
    """Fused per-datum -log N / -log EMG values and partials, see ``_numpy``."""
    flat = np.ascontiguousarray(np.asarray(r, dtype=np.float64).reshape(-1))
    return _impl(backend).emg_terms(flat, float(sigma), float(lam), bool(want_derivs))
