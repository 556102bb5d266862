"""Builds the optional compiled kernel extension.

The package is fully functional without the extension (a numpy fallback is
selected at import time); the build therefore degrades gracefully when
Cython or a C compiler is unavailable.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "annumax._kernels._compiled",
                ["src/annumax/_kernels/_compiled.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except Exception:
    extensions = []

setup(ext_modules=extensions)
