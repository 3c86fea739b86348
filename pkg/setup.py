from setuptools import setup, find_packages

setup(
    name="moeScaling",
    version="0.1.0",
    packages=find_packages(include=["moeScaling", "moeScaling.*"]),
    author="Yiyang Lu",
    author_email="y.lu@pdm-solutions.com",
    description="pdm impulse team toolkit for compute allocation and scaling laws of Mixture-of-Experts Transformers",
    python_requires=">=3.9",
    install_requires=[
        "numpy",
        "scipy",
        "pandas>=1.5",
        "tqdm",
    ],
    extras_require={
        "tests": ["pytest"],
    },
    entry_points={
        "console_scripts": [
            "moe-scaling=moeScaling.planner.cli:main",
        ],
    },
)
