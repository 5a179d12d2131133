import os

from setuptools import setup

ext_modules = []
if os.environ.get("NEUROGRAPH_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "neurograph._kernels._simcore",
                    sources=["src/neurograph/_kernels/_simcore.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        # No Cython / numpy at build time: install the pure-Python package;
        # the kernel backend falls back to numpy at import.
        ext_modules = []

setup(ext_modules=ext_modules)
