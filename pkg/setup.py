"""Build script adding the optional compiled bit-kernel extension.

The package is fully functional without the extension (a pure-Python
implementation of the same kernels is selected at import time), so any
failure to build it is non-fatal.

    python setup.py build_ext --inplace
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("esic._bitops", sources=["src/esic/_bitops.pyx"])],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
