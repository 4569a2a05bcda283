import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# The compiled kernels are an optional speedup; the package falls back to
# the NumPy implementations when the extension is missing.
ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "uavtraj._kernels",
                ["src/uavtraj/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level="3",
    )

setup(ext_modules=ext_modules)
