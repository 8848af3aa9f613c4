import numpy as np
from setuptools import setup

# The compiled kernels are optional: the package falls back to the pure
# Python implementations in ventlab._kernels._pyref when the extension
# is unavailable (no compiler, no Cython).
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/ventlab/_kernels/_accel.pyx",
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(
    ext_modules=ext_modules,
    include_dirs=[np.get_include()],
)
