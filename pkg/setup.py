#!/usr/bin/env python

from setuptools import setup

from ecobounds import __version__


setup(
    name="ecobounds",
    version=__version__,
    description="Treatment effect bounds for covariates unobserved in the study population",
    author="CZ.NIC, z. s. p. o.",
    author_email="packaging@turris.cz",
    license="GPL-3.0",
    install_requires=["numpy", "scipy", "pandas", "scikit-learn", "joblib"],
    tests_require=["pytest"],
    provides=["ecobounds"],
    extras_require={"sentry": ["sentry-sdk>=0.7.9"], "tests": ["pytest"]},
    packages=["ecobounds", "ecobounds.commands", "ecobounds.simulation", "ecobounds.utils"],
    entry_points={"console_scripts": ["ecobounds = ecobounds.__main__:main"]},
)
