from setuptools import find_packages, setup

from metaprep import __version__

setup(
    name='metaprep',
    version=__version__,
    description="Meta-learning multi-task pre-training at desk scale",
    packages=find_packages(exclude=['tests', 'tests.*']),
    python_requires='>=3.8',
    install_requires=[
        'matplotlib',
        'numpy',
        'pandas',
        'scipy',
        'toml',
        'tqdm',
    ],
    entry_points={
        'console_scripts': ['metaprep=metaprep.cli.main:main'],
    },
)
