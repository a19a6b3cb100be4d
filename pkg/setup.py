import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the compiled matcher when a toolchain exists; otherwise install
    anyway and let the package fall back to the pure-Python kernel."""

    def run(self):
        try:
            super().run()
        except Exception as exc:
            print(f"warning: skipping compiled matcher ({exc}); using pure-Python fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: could not build {ext.name} ({exc}); using pure-Python fallback")


def extensions():
    if os.environ.get("OPREWARD_PURE_PYTHON"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    return cythonize(
        [Extension("opreward.matching._greedy", ["src/opreward/matching/_greedy.pyx"])],
        language_level=3,
    )


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
