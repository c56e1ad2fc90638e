"""Builds the optional Cython kernel extension.

If compilation is impossible the install proceeds without the extension;
pcmi.kernels falls back to the pure-Python implementation at import time.
"""
from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "pcmi._ckernels",
                ["src/pcmi/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
