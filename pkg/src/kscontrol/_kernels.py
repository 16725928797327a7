"""Hot loops: sums of logarithms of linear factors.

log_factor_sum(z, c) = sum_j log(1 - z c_j) for every z.  This is the inner
loop of every canonical product and multiplier evaluation (grids of 2^16
points against thousands of factors).  A numba kernel is used when numba is
importable, unless KSCONTROL_NO_NUMBA is set to a non-empty value other than
"0"; the numpy path is always available as log_factor_sum_numpy.
"""
import os

import numpy as np

_CHUNK = 1 << 20  # complex entries per block in the numpy path


def log_factor_sum_numpy(z, c):
    z = np.ascontiguousarray(z, dtype=complex).ravel()
    c = np.ascontiguousarray(c, dtype=complex).ravel()
    out = np.zeros(z.size, dtype=complex)
    if c.size == 0:
        return out
    step = max(1, _CHUNK // c.size)
    for s in range(0, z.size, step):
        zz = z[s:s + step]
        out[s:s + step] = np.log(1.0 - np.multiply.outer(zz, c)).sum(axis=1)
    return out


def _numba_disabled():
    flag = os.environ.get("KSCONTROL_NO_NUMBA", "")
    return flag not in ("", "0")


try:
    if _numba_disabled():
        raise ImportError
    os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")
    from numba import njit, prange

    @njit(parallel=True, cache=True)
    def _log_factor_sum_jit(z, c):
        out = np.zeros(z.size, dtype=np.complex128)
        for i in prange(z.size):
            acc = 0j
            zi = z[i]
            for j in range(c.size):
                acc += np.log(1.0 - zi * c[j])
            out[i] = acc
        return out

    def log_factor_sum_numba(z, c):
        z = np.ascontiguousarray(z, dtype=np.complex128).ravel()
        c = np.ascontiguousarray(c, dtype=np.complex128).ravel()
        return _log_factor_sum_jit(z, c)

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False
    log_factor_sum_numba = None


def log_factor_sum(z, c):
    """sum_j log(1 - z c_j), elementwise in z (principal logs)."""
    shape = np.shape(z)
    if HAS_NUMBA:
        out = log_factor_sum_numba(z, c)
    else:
        out = log_factor_sum_numpy(z, c)
    return out.reshape(shape)


def backend():
    return "numba" if HAS_NUMBA else "numpy"
