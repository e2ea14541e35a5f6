from setuptools import setup, Extension

# The compiled kernel is optional: without Cython (or a working compiler)
# the package falls back to feriver._pykernel at import time.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("feriver._kernel", ["src/feriver/_kernel.pyx"])],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
