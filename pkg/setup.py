"""Build script for the optional compiled kernels.

The package works without the extension: audiorank.kernels falls back to a
pure-Python implementation when the compiled module is absent. Set
AUDIORANK_PURE_PYTHON=1 to skip the extension build entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("AUDIORANK_PURE_PYTHON") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "audiorank.kernels._native",
                    ["src/audiorank/kernels/_native.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level="3",
        )

setup(ext_modules=ext_modules)
