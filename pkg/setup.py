import os
from datetime import datetime

from setuptools import find_packages, setup

current_date = datetime.now().strftime("%Y.%m.%d")


def read_requirements(file_path):
    with open(file_path, "r") as file:
        return [line for line in file.read().splitlines() if line and not line.startswith("#")]


# Nightly builds get their own distribution name and a date version
package_name = "torchtrack-nightly" if os.environ.get("TORCHTRACK_NIGHTLY") else "torchtrack"

version = current_date if package_name == "torchtrack-nightly" else "0.1.0"

setup(
    name=package_name,
    version=version,
    packages=find_packages(exclude=("test", "test.*", "benchmarks", "tutorials")),
    include_package_data=True,
    package_data={
        "torchtrack": ["configs/*.yaml"],
    },
    install_requires=read_requirements("requirements.txt"),
    extras_require={"dev": read_requirements("dev-requirements.txt")},
    entry_points={"console_scripts": ["torchtrack = torchtrack.cli:main"]},
    python_requires=">=3.8",
    description="Jerk-limited online trajectory generation for tracking joint-space reference paths",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
)
