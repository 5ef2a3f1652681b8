"""Builds the optional compiled search kernel.

If Cython or a C compiler is missing the package still installs and runs on
the pure-Python kernel.  Set PHICOHERENT_NO_EXT=1 to skip the extension.
"""

import os
import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Compile failures leave the pure-Python kernel in charge."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - any toolchain failure
            print(f"phicoherent: compiled kernel not built ({exc})", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"phicoherent: compiled kernel not built ({exc})", file=sys.stderr)


def extensions():
    if os.environ.get("PHICOHERENT_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        print(f"phicoherent: building without the compiled kernel ({exc})", file=sys.stderr)
        return []
    ext = Extension(
        "phicoherent.solver._ckernel",
        ["src/phicoherent/solver/_ckernel.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"}, quiet=True)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
