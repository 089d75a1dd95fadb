"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure NumPy fallback is selected
at import time).  Set WASSMIX_PURE=1 to skip the extension entirely, e.g.
when no C toolchain is available.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("WASSMIX_PURE"):
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "wassmix._kernels_c",
                    ["src/wassmix/_kernels_c.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )

setup(ext_modules=ext_modules)
