"""Selects the compiled direct-correlation kernel when available.

The frequency-domain route in :mod:`ecgstudy.scalogram` is the production
path; the direct kernel is the independent cross-check and the hot loop
benchmarked in ``benchmarks/bench_kernels.py``.
"""
try:
    from ._cwt_ext import direct_correlate, BACKEND  # type: ignore[attr-defined]
except ImportError:
    from ._cwt_py import direct_correlate, BACKEND

__all__ = ["direct_correlate", "BACKEND"]
