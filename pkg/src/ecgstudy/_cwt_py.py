"""Pure-numpy fallback for the direct CWT correlation kernel."""
import numpy as np


def direct_correlate(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """out[t] = sum_m x[t + m] * kernel[m + L], zero-padded edges.

    Same contract as the compiled version; np.convolve with the reversed
    kernel realizes the correlation.
    """
    x = np.ascontiguousarray(x, dtype=np.complex128)
    kernel = np.ascontiguousarray(kernel, dtype=np.complex128)
    return np.convolve(x, kernel[::-1], mode="full")[len(kernel) - 1 - (len(kernel) - 1) // 2:][: len(x)]


BACKEND = "numpy"
