"""Build the optional compiled kernels.

The extension is optional: if Cython or a C compiler is missing the package
installs as pure Python and ``fplab.kernels`` falls back to numpy.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("FPLAB_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "fplab._ckernels",
                    ["src/fplab/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    # no FMA contraction: keeps results close to the numpy path
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
