from pathlib import Path
from setuptools import setup, find_packages

# The text of the README file
README = (Path(__file__).parent / "readme.md").read_text()

requirements = [
    "click",
    "numpy",
    "pandas",
    "pyYAML",
    "scipy",
    "tqdm",
]

setup(
    name="fockspec",
    version="0.3.0",
    description="Programming- and CLI-Interface for the spectral analysis of a lattice Hamiltonian on the cut Fock space",
    long_description=README,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests"]),
    license="MIT",
    classifiers=[
        # How mature is this project? Common values are
        #   4 - Beta
        #   5 - Production/Stable
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Physics",
        "Programming Language :: Python :: 3",
    ],
    python_requires=">=3.8",
    install_requires=requirements,
    extras_require={"tests": ["pytest"]},
    entry_points={"console_scripts": ["fockspec=fockspec.cli:main"]},
)
