"""Build script for the optional compiled traversal kernel.

The package works without the extension (a numpy fallback is selected at
import time); building it just makes forest scoring faster.
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "kpiloop._kernels._ctree",
                ["src/kpiloop/_kernels/_ctree.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        language_level="3",
    )

setup(ext_modules=ext_modules)
