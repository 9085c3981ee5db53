from setuptools import find_packages, setup

setup(
    name="manifold-operator-learning",
    version="0.1.0",
    description="Meshfree operator learning and Bayesian inversion on point-cloud manifolds",
    packages=find_packages(include=["src", "src.*", "config"]),
    py_modules=["app"],
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.12",
        "faiss-cpu>=1.7.4",
        "python-dotenv>=1.0.0",
        "torch>=2.1",
        "sympy>=1.12",
    ],
    extras_require={"test": ["pytest>=7.4"]},
    entry_points={"console_scripts": ["mol=src.cli.main:main"]},
)
