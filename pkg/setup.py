"""Setup file for the varcast package."""
import setuptools

setuptools.setup(
    name='varcast',
    version='0.1.0',
    description='Sparse VAR-X forecasting of weekly regional unemployment claims.',
    packages=setuptools.find_packages(exclude=('tests', 'examples*')),
    python_requires='>=3.9',
    install_requires=[
        'numpy>=1.23',
        'pandas>=1.4',
        'click>=8.1',
        'tqdm>=4.64',
        'yaspin>=2.1',
        'matplotlib>=3.5',
    ],
    entry_points={'console_scripts': ['varcast=varcast.cli:cli']},
)
