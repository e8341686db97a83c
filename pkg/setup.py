"""Build script: compiles the Cython hot-loop kernels when possible.

The package works without the extension (a pure-Python fallback is selected
at import time), so a failed Cython build only costs speed, not correctness.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "volwatch._speedups",
                ["src/volwatch/_speedups.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    sys.stderr.write(f"volwatch: skipping compiled kernels ({exc!r})\n")

setup(ext_modules=ext_modules)
