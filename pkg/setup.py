#!/usr/bin/env python

import sys
from setuptools import setup

try:
    import torch
except Exception:
    print("*** Warning: hetem requires PyTorch, see:")
    print("    pytorch.org")

if "sdist" in sys.argv:
    import os
    import subprocess
    import shutil
    docFolder = os.path.join(os.getcwd(), "documentation")
    # remove existing
    doctrees = os.path.join(docFolder, "build", "doctrees")
    if os.path.exists(doctrees):
        shutil.rmtree(doctrees)
    # compile
    p = subprocess.Popen(["sphinx-build", "-b", "html", "-d", doctrees, "source", os.path.join("build", "html")], cwd=docFolder)
    p.wait()
    # remove doctrees
    shutil.rmtree(doctrees, ignore_errors=True)


setup(
    name="hetem",
    version="0.1",
    description="Desk-scale heterogeneous cryo-EM reconstruction with conditional pose prediction",
    license="MIT",
    packages=[
        "hetem",
        "hetem.analysis",
        "hetem.formats",
        "hetem.model",
        "hetem.numerics",
        "hetem.simulator",
        "hetem.training",
    ],
    package_dir={"": "Lib"},
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.9",
        "torch>=2.0",
        "scikit-learn>=1.2",
        "pandas>=1.5",
        "pydantic>=2.7",
        "mrcfile>=1.4",
        "matplotlib>=3.6",
    ],
    extras_require={
        "test": ["pytest>=7"],
    },
    entry_points={
        "console_scripts": ["hetem=hetem.cli:main"],
    },
)
