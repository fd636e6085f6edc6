import os

from setuptools import Extension, setup

# POVF_NO_EXT=1 installs the pure-Python kernel only.
ext_modules = []
if not os.environ.get("POVF_NO_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "povf._vdfcore",
                ["src/povf/_vdfcore.pyx"],
                libraries=["gmp"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
