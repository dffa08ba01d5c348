import os

from setuptools import Extension, setup

ext_modules = []
pyx = os.path.join("src", "wpaircomp", "_kernels", "_cy.pyx")
if os.path.exists(pyx):
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "wpaircomp._kernels._cy",
                    [pyx],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3", "-fno-math-errno"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )

setup(ext_modules=ext_modules)
