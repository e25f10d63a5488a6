import os
from setuptools import find_namespace_packages, setup


DESCRIPTION = "CLI toolkit for cell ontology similarity, structured cell descriptions and their evaluation."
EXCLUDE_FROM_PACKAGES = ["build", "dist", "test", "test.*", "examples", "examples.*", "src", "*~", "*.db"]


setup(
    name="cellscribe",
    author="wambua",
    author_email="swskye17@gmail.com",
    version=open(os.path.abspath("version.txt")).read().strip(),
    packages=find_namespace_packages(include=["cellscribe", "cellscribe.*"], exclude=EXCLUDE_FROM_PACKAGES),
    description=DESCRIPTION,
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    entry_points={
        "console_scripts": [
            "cellscribe=cellscribe:main",
        ],
    },
    python_requires=">=3.12",
    install_requires=[
        "colorama",
        "numpy",
        "scipy",
        "pandas",
        "networkx",
        "scikit-learn",
        "nltk>=3.9",
        "obonet",
    ],
    extras_require={
        "test": ["pytest"],
    },
    include_package_data=True,
    zip_safe=False,
    license="GNU v3",
    keywords=["cell ontology", "personalized pagerank", "single-cell", "AUCell", "text evaluation"],
    classifiers=[
        "Environment :: Console",
        "Natural Language :: English",
        "Operating System :: OS Independent",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3 :: Only",
        "Programming Language :: Python :: 3.12",
        "Programming Language :: Python :: 3.13",
        "Topic :: Scientific/Engineering :: Bio-Informatics",
    ],
)
