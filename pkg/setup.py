"""Build script: compiles the optional Cython rate kernel.

The package works without the extension (a pure-numpy fallback is selected
at import time), so any failure here degrades to a pure-Python install.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "uavris._kernels_cy",
                ["src/uavris/_kernels_cy.pyx"],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
