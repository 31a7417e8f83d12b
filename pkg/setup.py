"""Build script: compiles the optional Cython kernel extension when possible.

The package works without it (sknakit.nn.kernels falls back to the numpy
backend), so any failure here is non-fatal by design. Build explicitly with:

    python setup.py build_ext --inplace
"""

from setuptools import setup

ext_modules = []
cmdclass = {}

try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "sknakit.nn._kernels_cy",
                ["src/sknakit/nn/_kernels_cy.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-fopenmp"],
                extra_link_args=["-fopenmp"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": 3, "embedsignature": True},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules, cmdclass=cmdclass)
