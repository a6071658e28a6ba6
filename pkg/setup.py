"""Build script: compiles the native kernel extension when Cython and a C
compiler are available; the package falls back to the numpy kernels
otherwise, so the extension is marked optional."""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "convae.kernels._native",
                ["src/convae/kernels/_native.pyx"],
                # -ffp-contract=off keeps results bit-identical to the
                # numpy fallback (no fused multiply-add).
                extra_compile_args=["-O3", "-ffp-contract=off"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
