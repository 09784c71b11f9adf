import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("COGKERNEL_NO_EXT", "") not in ("1", "true", "yes"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [Extension("cogkernel._ckernels", ["src/cogkernel/_ckernels.pyx"])],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
