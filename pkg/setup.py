"""Build the optional compiled kernels.

The package works without them: ``adaprelora._backend`` falls back to the
NumPy implementations when ``adaprelora._kernels`` cannot be imported.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - build without Cython
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "adaprelora._kernels",
                ["src/adaprelora/_kernels.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )

setup(ext_modules=ext_modules)
