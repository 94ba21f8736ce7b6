"""CMake-driven build of the _survscan extension under plain setuptools.

`pip install -e . --no-build-isolation` (or a wheel build) configures the
CMake project with only the python target enabled and drops the resulting
module into the survscan package.
"""

import pathlib
import shutil
import subprocess
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source = pathlib.Path(__file__).resolve().parent
        build_dir = pathlib.Path(self.build_temp).resolve() / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)
        subprocess.run(
            [
                "cmake",
                "-S", str(source),
                "-B", str(build_dir),
                "-DSKBUILD=ON",  # trims the build to the extension target
                "-DCMAKE_BUILD_TYPE=Release",
                f"-DPython_EXECUTABLE={sys.executable}",
            ],
            check=True,
        )
        subprocess.run(
            ["cmake", "--build", str(build_dir), "--target", "_survscan"],
            check=True,
        )
        staged = list((build_dir / "python_stage").glob("_survscan*.so"))
        if not staged:
            raise RuntimeError("cmake did not produce the _survscan module")
        target = pathlib.Path(self.get_ext_fullpath(ext.name)).resolve()
        target.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(staged[0], target)


setup(
    ext_modules=[CMakeExtension("survscan._survscan")],
    cmdclass={"build_ext": CMakeBuild},
)
