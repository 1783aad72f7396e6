"""Builds the optional compiled kernel extension.

The package is fully functional without it (a pure-numpy fallback is
selected at import time); set PREPNET_NO_EXT=1 to skip compilation.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("PREPNET_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "prepnet.kernels._native",
                    sources=["src/prepnet/kernels/_native.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
