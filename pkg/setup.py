import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "emlasim._core._kernels_cy",
                sources=["src/emlasim/_core/_kernels_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython: install with the pure-Python kernels only.
    ext_modules = []

setup(ext_modules=ext_modules)
