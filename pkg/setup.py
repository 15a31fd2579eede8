# Builds the optional compiled kernel core. If Cython or a C compiler is
# unavailable the install still succeeds and the package falls back to the
# pure-numpy kernels at import time.
#   in-place build for development:  python setup.py build_ext --inplace
import warnings

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing compiler
            warnings.warn(f"skipping compiled kernels ({exc}); using the numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"skipping {ext.name} ({exc}); using the numpy fallback")


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        warnings.warn(f"skipping compiled kernels ({exc}); using the numpy fallback")
        return []
    ext = Extension(
        "mutualkp.kernels._core",
        ["src/mutualkp/kernels/_core.pyx"],
        include_dirs=[np.get_include()],
        # keep float arithmetic bit-identical with the numpy fallback
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
