"""Builds the optional Cython kernel for the Monte-Carlo simulator.

The package works without it: depforge.mc falls back to the pure-Python
kernel when the extension is missing or fails to compile.
"""

import os

from setuptools import Extension, setup

PYX = "src/depforge/_mckernel.pyx"

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None and os.path.exists(PYX):
    ext_modules = cythonize(
        [Extension("depforge._mckernel", [PYX], optional=True)],
        language_level=3,
    )
else:
    ext_modules = []

setup(ext_modules=ext_modules)
