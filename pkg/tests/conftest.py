import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.bargaining.geometry import preset_problem  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: fine-grid PDE and large Monte Carlo runs")


@pytest.fixture(scope="session")
def triangle():
    return preset_problem("triangle")


@pytest.fixture(scope="session")
def trapezoid():
    return preset_problem("trapezoid")


@pytest.fixture(scope="session")
def trapezoid_corner():
    """Trapezoid with the disagreement point moved off the origin"""
    return preset_problem("trapezoid", disagreement=(0.2, 0.1))


@pytest.fixture(scope="session")
def parabola():
    return preset_problem("parabola")


@pytest.fixture(scope="session")
def fig3_left():
    return preset_problem("fig3-left")


@pytest.fixture(scope="session")
def fig3_right():
    return preset_problem("fig3-right")
