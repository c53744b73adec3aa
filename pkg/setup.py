"""Build script for the optional compiled pixel kernels.

``pip install -e . --no-build-isolation`` compiles ``formkv.kernels._fast``
when Cython and a C toolchain are available. If the build fails (or
FORMKV_NO_EXT=1 is set) the install still succeeds and the package selects
the numpy reference kernels at import time.
"""

import os

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the extension if possible, warn and continue otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # toolchain missing, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(f"WARNING: compiled kernels skipped ({exc}); "
              "formkv will use the numpy reference backend")


def _extensions():
    if os.environ.get("FORMKV_NO_EXT"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        print(f"WARNING: compiled kernels skipped ({exc})")
        return []
    ext = Extension(
        "formkv.kernels._fast",
        ["src/formkv/kernels/_fast.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(ext_modules=_extensions(), cmdclass={"build_ext": OptionalBuildExt})
