#!/usr/bin/env python
"""Setup Script for the Sub-sampled Newton benchmark."""
import setuptools

INSTALL_REQUIRES = ["pyyaml", "numpy>=1.21", "scipy>=1.7"]

PYTHON_REQUIRES = ">=3.7"

with open("README.md", "r") as readme:
    LONG_DESCRIPTION = readme.read()

setuptools.setup(
    name="ssn-bench",
    version="0.1.0",
    description="Sub-sampled Newton methods with non-uniform Hessian sampling and a benchmark harness",
    long_description=LONG_DESCRIPTION,
    long_description_content_type="text/markdown",
    packages=["ssn_bench", "ssn_bench.datasets", "ssn_bench.optimizers"],
    install_requires=INSTALL_REQUIRES,
    python_requires=PYTHON_REQUIRES,
    entry_points={"console_scripts": ["ssn-bench=ssn_bench.cli:run_cli"]},
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: Apache Software License",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
)
