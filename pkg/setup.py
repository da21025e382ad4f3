"""Build script for the optional compiled clustering kernels.

The package works without the extension (a pure-Python fallback is selected
at import time), so the extension is marked optional: a failed compile
degrades to the slow path instead of failing the install.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "lacclean.kernels._ckernels",
                sources=["src/lacclean/kernels/_ckernels.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": 3},
    )
else:
    ext_modules = []

setup(ext_modules=ext_modules)
