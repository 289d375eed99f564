"""Build script for the optional Cython statevector kernels.

The package works without the extension (a NumPy fallback is selected at
import time); the extension just makes gate application and trajectory
re-simulation much faster. `HQCSTACK_NO_EXT=1` skips the build entirely.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("HQCSTACK_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "hqcstack.backend._statevector",
                    ["src/hqcstack/backend/_statevector.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
