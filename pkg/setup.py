# coding: utf-8

from setuptools import setup, find_packages  # noqa: H301

NAME = "aegisnet"


with open("README.md", "r") as fh:
    long_description = fh.read()


setup(
    name=NAME,
    version="0.1.0",
    entry_points={"console_scripts": ["aegisnet = aegisnet.scripts.cli:main"]},
    description="Secure in-network aggregation simulator for clustered sensor networks",
    packages=find_packages(),
    include_package_data=True,
    install_requires=[
        "click",
        "numpy",
        "pydantic<2",
        "PyYAML",
        "toolz",
        "tqdm",
    ],
    extras_require={"test": ["hypothesis", "pytest"]},
    long_description=long_description,
    long_description_content_type="text/markdown",
    classifiers=[
        "Programming Language :: Python :: 3 :: Only",
        "License :: OSI Approved :: BSD License",
        "Operating System :: OS Independent",
        "Development Status :: 3 - Alpha",
    ],
    python_requires=">=3.7",
)
