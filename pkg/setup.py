import os

from setuptools import Extension, setup

# The compiled kernels are optional: if Cython or a C toolchain is missing
# the package installs pure-Python and selects the numpy kernels at import.
ext_modules = []
if os.environ.get("SPARSEKIT_NO_EXT", "") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "sparsekit._kernels_cy",
                    ["src/sparsekit/_kernels_cy.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
