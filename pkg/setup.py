from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "convlab.sdp._admm_ext",
        ["src/convlab/sdp/_admm_ext.pyx"],
        extra_compile_args=["-O3"],
        optional=True,
    ),
]

setup(ext_modules=cythonize(extensions, language_level="3"))
