import numpy as np
from setuptools import Extension, setup

# The compiled k-nearest-neighbour kernel is optional: if Cython or a C
# compiler is missing the install still succeeds and graphprune.graph falls
# back to the pure-numpy implementation at import time.
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "graphprune._knn_cy",
                ["src/graphprune/_knn_cy.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
