"""Build script for the optional compiled assembly kernels.

The package is pure Python plus one Cython extension holding the hot
loops (constitutive curves and flux assembly). The extension is marked
optional: if no compiler is available the install still succeeds and the
package falls back to the numpy kernels at import time.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "richardsfv._kernels._fast",
                ["src/richardsfv/_kernels/_fast.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                # contraction off keeps the compiled kernels bit-compatible
                # with the numpy backend
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
    for ext in extensions:
        ext.optional = True
except ImportError:
    extensions = []

setup(ext_modules=extensions)
