import os
import subprocess
import sys

import numpy as np
import pytest

from kscontrol import _kernels


@pytest.mark.skipif(not _kernels.HAS_NUMBA, reason="numba not importable")
@pytest.mark.parametrize("n,m", [(1, 1), (7, 33), (500, 2000)])
def test_numba_matches_numpy(n, m):
    r = np.random.default_rng(n + m)
    z = r.normal(size=n) * 50 + 1j * r.normal(size=n)
    c = (r.normal(size=m) + 1j * r.normal(size=m)) / (1 + np.arange(m)) ** 2
    a = _kernels.log_factor_sum_numpy(z, c)
    b = _kernels.log_factor_sum_numba(z, c)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_shape_preserved_and_empty():
    z = np.zeros((3, 4), complex)
    assert _kernels.log_factor_sum(z, np.array([1.0 + 0j])).shape == (3, 4)
    assert np.all(_kernels.log_factor_sum_numpy(np.ones(3), np.array([], complex)) == 0)


def test_env_flag_selects_numpy():
    env = dict(os.environ, KSCONTROL_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from kscontrol import _kernels; print(_kernels.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
