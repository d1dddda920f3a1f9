import os

import numpy
from setuptools import Extension, setup

# The compiled kernel is optional: if Cython or a C compiler is missing the
# package falls back to the pure-Python implementation at import time.
try:
    if not os.path.exists("src/roacert/kernels/_fast.pyx"):
        raise ImportError("kernel source not present")
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "roacert.kernels._fast",
                ["src/roacert/kernels/_fast.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
