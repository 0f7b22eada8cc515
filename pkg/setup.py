"""Builds the optional compiled numerical core.

The extension mirrors tiltsim/_purecore.py; FP contraction is disabled so
both backends produce bit-identical results.  A failed build is tolerated:
the package falls back to the pure-Python kernels at import time.
"""

from setuptools import Extension, setup
from Cython.Build import cythonize

extensions = [
    Extension(
        "tiltsim._fastcore",
        ["src/tiltsim/_fastcore.pyx"],
        extra_compile_args=["-O3", "-ffp-contract=off"],
        optional=True,
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
