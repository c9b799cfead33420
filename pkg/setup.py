import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # no Cython: the package falls back to pure Python kernels
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "ecdsynth._traj",
                ["src/ecdsynth/_traj.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
