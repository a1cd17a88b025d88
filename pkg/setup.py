import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("STOCLOT_NO_EXT"):
    import numpy as np
    from Cython.Build import cythonize

    ext = Extension(
        "stoclot._kernels._ckernels",
        sources=["src/stoclot/_kernels/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize(
        [ext],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
