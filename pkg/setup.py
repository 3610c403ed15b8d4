"""Builds the optional Cython extension holding the direct-convolution CWT kernel.

If the extension cannot be built the package still works: ecgstudy.kernels
falls back to a pure-numpy implementation at import time.
"""
from setuptools import setup
from setuptools.extension import Extension

try:
    from Cython.Build import cythonize
    import numpy as np

    ext_modules = cythonize(
        [Extension(
            "ecgstudy._cwt_ext",
            ["src/ecgstudy/_cwt_ext.pyx"],
            extra_compile_args=["-O3", "-march=native", "-ffast-math"],
        )],
        compiler_directives={"language_level": "3"},
    )
    include_dirs = [np.get_include()]
except ImportError:
    ext_modules = []
    include_dirs = []

setup(ext_modules=ext_modules, include_dirs=include_dirs)
