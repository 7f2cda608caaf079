"""Build script. The compiled kernel module is optional: if Cython or a C
compiler is unavailable the package installs anyway and falls back to the
pure-Python kernels at import time."""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "crowdalloc._kernels._native",
                ["src/crowdalloc/_kernels/_native.pyx"],
                include_dirs=[np.get_include()],
                # keep float contraction off so results match the
                # pure-Python fallback bit for bit
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
