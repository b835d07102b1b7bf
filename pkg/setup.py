"""Build script: compiles the Cython kernel extension when a toolchain is
available, otherwise installs the pure-Python package (the kernel selector
falls back at import time)."""

import sys

from setuptools import setup
from setuptools.errors import CCompilerError, ExecError, PlatformError

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "fpa._kernels",
                ["src/fpa/_kernels.pyx"],
                # no FMA contraction: results must match the pure-Python
                # fallback bit for bit
                extra_compile_args=["-ffp-contract=off"],
            )
        ],
        language_level=3,
        compiler_directives={"boundscheck": False, "wraparound": False, "cdivision": True},
    )
except ImportError:
    print("Cython not available; building pure-Python only", file=sys.stderr)


class BuildFailed(Exception):
    pass


if __name__ == "__main__":
    try:
        setup(ext_modules=ext_modules)
    except (CCompilerError, ExecError, PlatformError):
        print("extension build failed; falling back to pure Python", file=sys.stderr)
        setup(ext_modules=[])
