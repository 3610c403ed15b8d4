"""Benchmark: compiled vs pure-numpy direct-correlation CWT kernel.

Runs the direct (time-domain) CWT route with both backends over a batch of
segment-sized signals and prints per-backend timings, plus the FFT route
for reference. Usage: python benchmarks/bench_kernels.py [n_repeats]
"""
import sys
import time

import numpy as np

from ecgstudy import _cwt_py, kernels
from ecgstudy.scalogram import cwt_complex, scale_grid

try:
    from ecgstudy import _cwt_ext
except ImportError:
    _cwt_ext = None


def time_backend(correlate, x, kerns, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for kern in kerns:
            correlate(x, kern)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    repeats = int(sys.argv[1]) if len(sys.argv) > 1 else 3
    fs = 250.0
    n = 2500  # a 10 s segment at the model rate
    rng = np.random.default_rng(0)
    x = rng.normal(size=n).astype(np.complex128)
    grid = scale_grid()

    from ecgstudy.scalogram import _sampled_kernel
    kerns = [_sampled_kernel(s, fs, grid.omega0) for s in grid.scales]
    total_taps = sum(len(k) for k in kerns)
    print(f"signal: {n} samples, {len(kerns)} scales, {total_taps} total kernel taps")
    print(f"active backend: {kernels.BACKEND}")

    rows = [("numpy", _cwt_py.direct_correlate)]
    if _cwt_ext is not None:
        rows.insert(0, ("cython", _cwt_ext.direct_correlate))
    results = {}
    for name, fn in rows:
        results[name] = time_backend(fn, x, kerns, repeats)
        print(f"direct correlate [{name:>6}]: {results[name] * 1e3:8.1f} ms")
    if "cython" in results:
        print(f"speedup cython vs numpy: {results['numpy'] / results['cython']:.2f}x")

    t0 = time.perf_counter()
    cwt_complex(x.real, grid, fs, method="fft")
    print(f"fft route (production path): {(time.perf_counter() - t0) * 1e3:8.1f} ms")

    a = _cwt_py.direct_correlate(x, kerns[len(kerns) // 2])
    if _cwt_ext is not None:
        b = _cwt_ext.direct_correlate(x, kerns[len(kerns) // 2])
        print(f"max |cython - numpy|: {np.abs(a - b).max():.3e}")


if __name__ == "__main__":
    main()
