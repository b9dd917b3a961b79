import sys

from setuptools import Extension, setup

# The compiled kernel is optional: if Cython or a C compiler is missing the
# package installs pure-Python and mstbnn.kernels falls back to numpy.
ext_modules = []
try:
    from Cython.Build import cythonize
    import numpy as np

    ext_modules = cythonize(
        [
            Extension(
                "mstbnn.kernels._popcount",
                ["src/mstbnn/kernels/_popcount.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError as exc:
    print(f"building without compiled kernels: {exc}", file=sys.stderr)

setup(ext_modules=ext_modules)
