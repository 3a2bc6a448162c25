"""Build script for the optional compiled stepping kernel.

The package works without the extension (a pure-Python mirror is selected at
import time); the extension only accelerates the scalar incremental
minimization loop.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the Cython kernel if possible, fall back silently otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler or Cython missing
            print(f"skipping compiled kernel ({exc!r}); pure-Python fallback will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"skipping {ext.name} ({exc!r}); pure-Python fallback will be used")


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "visco_pt._step_kernels",
        ["src/visco_pt/_step_kernels.pyx"],
        # -ffp-contract=off keeps the C arithmetic bit-compatible with the
        # pure-Python mirror (no fused multiply-adds).
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
