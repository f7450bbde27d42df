import numpy as np
import pytest

from spinshortcut import PhysicalParams
from spinshortcut.harness import DEFAULT_ANSATZ

ACCEPTANCE_LINES = []


@pytest.fixture
def params():
    return PhysicalParams()


@pytest.fixture
def ansatz():
    return DEFAULT_ANSATZ


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
