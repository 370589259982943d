"""Build script for the optional compiled counting core.

The package is pure Python except for stcooc._cooc, a Cython extension that
accelerates correlogram range counting.  If Cython or a C compiler is missing
the build degrades gracefully and the package falls back to the pure-Python
implementation of the same kernels (stcooc._cooc_py) at import time.

To (re)build the extension in place:  python setup.py build_ext --inplace
Set STCOOC_NO_EXT=1 to skip the extension entirely.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """build_ext that downgrades compile failures to a warning."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            "warning: building the stcooc._cooc extension failed (%s); "
            "the pure-Python counting kernels will be used instead" % (exc,)
        )


def extensions():
    if os.environ.get("STCOOC_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("warning: Cython not available; skipping the compiled counting core")
        return []
    ext = Extension(
        "stcooc._cooc",
        sources=["src/stcooc/_cooc.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
