"""CMake-driven build of the infosamp._core extension.

The C++ library, CLI and tests live in CMake; this shim only builds the
extension module so `pip install .` works without a separate cmake step.
"""

import os
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source_dir = Path(__file__).resolve().parent
        ext_path = Path(self.get_ext_fullpath(ext.name)).resolve()
        ext_path.parent.mkdir(parents=True, exist_ok=True)
        build_dir = Path(self.build_temp).resolve()
        build_dir.mkdir(parents=True, exist_ok=True)

        configure = [
            "cmake",
            "-S",
            str(source_dir),
            "-B",
            str(build_dir),
            "-DCMAKE_BUILD_TYPE=Release",
            "-DINFOSAMP_PYTHON=ON",
            f"-DPYTHON_EXECUTABLE={sys.executable}",
        ]
        subprocess.run(configure, check=True)
        subprocess.run(
            ["cmake", "--build", str(build_dir), "--target", "_core", "--parallel",
             str(os.cpu_count() or 1)],
            check=True,
        )

        built = build_dir / "python" / "infosamp" / ext_path.name
        if not built.exists():
            candidates = list((build_dir / "python" / "infosamp").glob("_core.*"))
            if not candidates:
                raise RuntimeError("cmake did not produce the _core extension")
            built = candidates[0]
        self.copy_file(str(built), str(ext_path))


setup(
    ext_modules=[CMakeExtension("infosamp._core")],
    cmdclass={"build_ext": CMakeBuild},
)
