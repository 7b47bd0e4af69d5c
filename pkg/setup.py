import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("SHEAFCHECK_NO_EXT", "") in ("", "0"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "sheafcheck._speedups",
                    ["src/sheafcheck/_speedups.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )

setup(ext_modules=ext_modules)
