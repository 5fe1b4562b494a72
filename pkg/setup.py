"""Build script: compiles the optional Cython kernel for the nested proximal update.

The package is fully functional without the extension (a NumPy fallback is
selected at import time), so any build failure here degrades to a warning
instead of aborting the install.
"""

import warnings

from setuptools import setup


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:  # pragma: no cover - build environment dependent
        warnings.warn(f"building without compiled kernels ({exc})")
        return []
    ext = Extension(
        "ddsparse.proxops._kernels",
        ["src/ddsparse/proxops/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=_extensions())
