import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "torusdiff._em_core",
                ["src/torusdiff/_em_core.pyx"],
                include_dirs=[numpy.get_include()],
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
except ImportError:
    # Cython missing: install the pure-Python package, the stepper in
    # torusdiff._em_python is used instead.
    extensions = []

setup(ext_modules=extensions)
