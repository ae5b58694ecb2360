from setuptools import find_packages, setup

from skram.utils.skram_config import SkramConfig

with open("requirements.txt") as stream:
    requirements = [line.strip() for line in stream if line.strip()]

setup(
    name="skram",
    version=SkramConfig.version,
    description="Spectral Galerkin experiments on the small mass limit of stochastic damped wave equations",
    packages=find_packages(exclude=["skram.tests*"]),
    install_requires=requirements,
    python_requires=">=3.8",
    entry_points={"console_scripts": ["skram=skram.__main__:main"]},
)
