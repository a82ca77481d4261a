import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "pakan._kernels",
                ["src/pakan/_kernels.pyx"],
                extra_compile_args=["-O3", "-march=native", "-fassociative-math",
                    "-fno-signed-zeros", "-fno-trapping-math"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython available: install runs with the pure-numpy kernel fallback.
    ext_modules = []

setup(ext_modules=ext_modules)
