import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("BERNPACK_SKIP_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "bernpack._kernels",
                    sources=["src/bernpack/_kernels.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        # No Cython available: install runs with the pure-python kernels.
        ext_modules = []

setup(ext_modules=ext_modules)
