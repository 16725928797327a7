"""Numba vs numpy timing of the log-factor kernel.

    python3 benchmarks/bench_kernels.py [--n 16384] [--m 2000] [--repeat 3]

The same kernel backs every product evaluation, so the speed-up here is what
the PW grid and the estimate suite see.  Setting KSCONTROL_NO_NUMBA=1 makes
the package itself fall back to the numpy path.
"""
import argparse
import time

import numpy as np

from kscontrol import _kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=1 << 14)
    ap.add_argument("--m", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    z = np.linspace(-400, 400, args.n) + 0j
    c = 1.0 / (np.arange(1, args.m + 1) ** 2 * (1 + 0.3j)) * rng.uniform(0.5, 1.5, args.m)

    t_np, ref = best_of(lambda: _kernels.log_factor_sum_numpy(z, c), args.repeat)
    print(f"numpy : {t_np:8.4f} s  ({args.n} points x {args.m} factors)")
    if not _kernels.HAS_NUMBA:
        print("numba : unavailable (KSCONTROL_NO_NUMBA set or numba missing)")
        return
    t0 = time.perf_counter()
    _kernels.log_factor_sum_numba(z[:4], c)
    print(f"numba compile/load: {time.perf_counter() - t0:.3f} s")
    t_nb, out = best_of(lambda: _kernels.log_factor_sum_numba(z, c), args.repeat)
    err = np.max(np.abs(out - ref)) / max(1.0, np.max(np.abs(ref)))
    print(f"numba : {t_nb:8.4f} s  speed-up {t_np / t_nb:6.1f}x  max rel diff {err:.2e}")


if __name__ == "__main__":
    main()
