"""Build script for the optional compiled attention kernels.

The package works without the extension (a pure-numpy fallback is selected
at import time), so a missing compiler or Cython must not fail the install.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext = Extension(
        "v6diffusion.kernels._attn_cy",
        ["src/v6diffusion/kernels/_attn_cy.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    ext_modules = cythonize([ext], language_level="3")
except ImportError:
    pass

setup(ext_modules=ext_modules)
