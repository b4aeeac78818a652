"""Build script for the compiled SDE stepping kernel.

The extension is optional: if no compiler (or no Cython) is available the
package still installs and transparently falls back to the pure-Python
stepper in ``affinelab.sde._python_backend``.  The two backends draw from
the same bit-generator streams and mirror each other operation-by-operation,
so they produce bit-identical trajectories; only throughput differs (see
``benchmarks/benchmark_backends.py``).
"""

import os

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:  # source-only install
    ext_modules = []
else:
    ext = Extension(
        "affinelab._kernels._sde_kernel",
        ["src/affinelab/_kernels/_sde_kernel.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[os.path.join(os.path.dirname(np.random.__file__), "lib")],
        libraries=["npyrandom"],
        # -ffp-contract=off keeps C arithmetic bit-compatible with the
        # pure-Python fallback (no FMA contraction).
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
    ext_modules = cythonize([ext], language_level=3)

setup(ext_modules=ext_modules)
