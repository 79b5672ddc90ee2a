"""Builds the optional compiled kernel core. Set SERMIX_PURE=1 to skip it."""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("SERMIX_PURE"):
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "sermix.kernels._core",
                    ["src/sermix/kernels/_core.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        # No Cython available: install with the numpy fallback only.
        ext_modules = []

setup(ext_modules=ext_modules)
