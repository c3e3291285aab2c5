"""Build hook for the optional Cython kernels.

A missing compiler or Cython install leaves the pure numpy kernels in
place; the package still works, only slower.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("SHELLHOM_NO_EXT", "") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("shellhom.kernels._ckernels",
                       ["src/shellhom/kernels/_ckernels.pyx"],
                       include_dirs=[np.get_include()],
                       extra_compile_args=["-O3"])],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
