"""Build script: compiles the optional step-detection kernel.

The package works without the compiled extension (a pure-Python twin is
selected at import time), so the extension is marked optional and any
build failure is non-fatal.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "tracefloor._kernels._fsm",
                ["src/tracefloor/_kernels/_fsm.pyx"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
