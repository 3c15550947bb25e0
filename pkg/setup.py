import setuptools

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()


__version__ = "0.1.0"

REPO_NAME = "cluster-inference"
AUTHOR_USER_NAME = "Maaz Hussain"
SRC_REPO = "clusterInference"
AUTHOR_EMAIL = "maazhussain0121@gmail.com"


setuptools.setup(
    name=REPO_NAME,
    version=__version__,
    author=AUTHOR_USER_NAME,
    author_email=AUTHOR_EMAIL,
    description="Design-based cluster-robust inference: variance estimators, exact design variances and coverage experiments",
    long_description=long_description,
    long_description_content_type="text/markdown",
    url=f"http://github.com/{AUTHOR_USER_NAME}/{REPO_NAME}",
    project_urls={
        "Bug Tracker": f"http://github.com/{AUTHOR_USER_NAME}/{REPO_NAME}/issues",
    },
    package_dir={"": "src"},
    packages=setuptools.find_packages(where="src"),
    python_requires=">=3.10",
    install_requires=[
        "numpy",
        "pandas",
        "scipy",
        "python-box==6.0.2",
        "pyYAML",
        "joblib",
        "tqdm",
    ],
    extras_require={
        "test": ["pytest", "hypothesis", "statsmodels"],
        "pipeline": ["dvc"],
    },
    entry_points={
        "console_scripts": [f"cluster-inference={SRC_REPO}.cli:main"],
    },
)
