"""Build script: compiles the optional relay-loop extension.

The package is fully functional without the extension (a numpy backend
implements the same loop); any build failure downgrades to a warning so
pure-Python installs keep working on boxes without a C toolchain.
"""
import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


def _warn(reason):
    sys.stderr.write(
        "relaypd: skipping compiled kernel (%s); the numpy backend will be used\n"
        % reason
    )


class optional_build_ext(build_ext):
    """build_ext that downgrades compiler failures to a warning."""

    def run(self):
        try:
            build_ext.run(self)
        except Exception as exc:  # pragma: no cover - toolchain-dependent
            _warn(exc)

    def build_extension(self, ext):
        try:
            build_ext.build_extension(self, ext)
        except Exception as exc:  # pragma: no cover - toolchain-dependent
            _warn(exc)


ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "relaypd._kernels",
                ["src/relaypd/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except Exception as exc:  # pragma: no cover - toolchain-dependent
    _warn(exc)
    ext_modules = []

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
