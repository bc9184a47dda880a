import setuptools

with open("README.rst", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="robnas",
    version="0.1.0",
    author="Robnas developers",
    description="Train-free robust neural architecture search with neural tangent kernels",
    long_description=long_description,
    packages=setuptools.find_packages(include=["robnas", "robnas.*"]),
    include_package_data=True,
    install_requires=["numpy>=1.24", "scipy>=1.10"],
    extras_require={"dev": ["pytest>=7.0"], "docs": ["sphinx", "sphinx_rtd_theme"]},
    entry_points={"console_scripts": ["robnas = robnas.cli:main"]},
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",

        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",

        "Operating System :: OS Independent",

        "Topic :: Scientific/Engineering :: Artificial Intelligence"
    ],
    python_requires='>=3.11',
    keywords=["neural architecture search", "adversarial robustness", "neural tangent kernel"]
)
