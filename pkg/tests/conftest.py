"""
Shared pytest configuration for the PPBS CZ unit tests.

Usage:
    Simply run ``pytest`` from the project root.  Optimizer-heavy tests carry
    the ``slow`` marker and can be skipped with ``pytest -m "not slow"``.

Every stochastic test passes an explicit seed, so results are reproducible
run to run.
"""

import os

import pytest

GOLDEN_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "golden")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: optimizer-heavy tests")


@pytest.fixture
def golden_dir():
    """Folder for reference outputs written on first run and compared afterwards."""
    os.makedirs(GOLDEN_DIR, exist_ok=True)
    return GOLDEN_DIR
