# cython: boundscheck=False, wraparound=False, cdivision=True
"""Direct (time-domain) complex correlation kernel for the CWT.

Zero padding at the edges; the caller supplies the already-sampled,
conjugated wavelet kernel centered at index L = (len(kernel) - 1) // 2.

The complex inputs are split into separate real/imaginary planes so the
inner products run over contiguous doubles the compiler can vectorize.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def direct_correlate(cnp.complex128_t[::1] x, cnp.complex128_t[::1] kernel):
    """out[t] = sum_m x[t + m] * kernel[m + L], zero-padded edges."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t klen = kernel.shape[0]
    cdef Py_ssize_t L = (klen - 1) // 2
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.zeros(n, dtype=np.complex128)
    cdef cnp.complex128_t[::1] ov = out

    xa = np.ascontiguousarray(np.asarray(x).real)
    xb = np.ascontiguousarray(np.asarray(x).imag)
    ka = np.ascontiguousarray(np.asarray(kernel).real)
    kb = np.ascontiguousarray(np.asarray(kernel).imag)
    cdef double[::1] xr = xa
    cdef double[::1] xi = xb
    cdef double[::1] kr = ka
    cdef double[::1] ki = kb

    cdef Py_ssize_t t, m, lo, hi
    cdef double ar, ai
    for t in range(n):
        lo = -L if t - L >= 0 else -t
        hi = klen - L if t + (klen - L) <= n else n - t
        ar = 0.0
        ai = 0.0
        for m in range(lo, hi):
            ar += xr[t + m] * kr[m + L] - xi[t + m] * ki[m + L]
            ai += xr[t + m] * ki[m + L] + xi[t + m] * kr[m + L]
        ov[t] = ar + 1j * ai
    return out


BACKEND = "cython"
