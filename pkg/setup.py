import os

from setuptools import setup

ext_modules = []
if os.environ.get("CARADEC_NO_EXT", "") not in ("1", "true"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "caradec.kernels._speedups",
                    ["src/caradec/kernels/_speedups.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        # Pure-Python install still works; the kernel dispatcher falls back.
        ext_modules = []

setup(ext_modules=ext_modules)
