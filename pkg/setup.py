"""Build script for the optional compiled kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time); building it just makes the hot loops faster.
"""

import numpy as np
from setuptools import Extension, setup
from Cython.Build import cythonize

ext = Extension(
    "hybridclust._kernels",
    ["src/hybridclust/_kernels.pyx"],
    include_dirs=[np.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

setup(ext_modules=cythonize([ext], language_level=3))
