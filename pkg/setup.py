"""Build the optional compiled box kernels.

The package works without the extension (a numpy fallback is selected at
import time); building it just makes IoU/NMS/matching hot loops faster.

    pip install -e . --no-build-isolation
    # or, for an in-place build of only the extension:
    python setup.py build_ext --inplace
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
    import numpy as np

    extensions = cythonize(
        [
            Extension(
                "thermeval._kernels._box_ops",
                sources=["src/thermeval/_kernels/_box_ops.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": "3",
        },
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
