from setuptools import find_packages, setup

setup(
    name="cfa_hypertree",
    version="0.1.0",
    description="module for computing hypertree, generalized and fractional hypertree decompositions of CQ/CSP hypergraphs",
    packages=find_packages(exclude=["tests", "venv", "examples"]),
    author="cfa_hypertree developers",
    python_requires=">=3.10",
    install_requires=[
        "networkx>=3.1",
        "numpy",
        "pandas",
        "pyyaml",
        "toml>=0.10.2",
    ],
    entry_points={
        "console_scripts": [
            "hd=cfa_hypertree.cli:hd_main",
            "ghd=cfa_hypertree.cli:ghd_main",
            "improve=cfa_hypertree.cli:improve_main",
            "hg-stats=cfa_hypertree.cli:stats_main",
            "bench=cfa_hypertree.cli:bench_main",
            "report=cfa_hypertree.cli:report_main",
        ]
    },
)
