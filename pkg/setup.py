from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = [
    Extension(
        "fronsim.kernels._native",
        ["src/fronsim/kernels/_native.pyx"],
        extra_compile_args=["-O3"],
    )
]

# Without Cython the package still installs; fronsim.kernels falls back to the
# pure-Python twin at import time.
setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"})
    if cythonize is not None
    else []
)
