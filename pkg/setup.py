from setuptools import find_packages, setup

with open("requirements.txt", encoding="utf-8") as f:
    requirements = [line.strip() for line in f if line.strip() and not line.startswith("#")]

setup(
    name="ddvm",
    version="0.1.0",
    description="Denoising diffusion models for monocular depth and optical flow",
    packages=find_packages(exclude=("tests", "tests.*", "examples", "examples.*")),
    python_requires=">=3.9",
    install_requires=[r for r in requirements if not r.startswith("pytest")],
    extras_require={"test": [r for r in requirements if r.startswith("pytest")]},
    entry_points={"console_scripts": ["ddvm=ddvm.cli.main:main"]},
)
