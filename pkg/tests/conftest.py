import numpy as np
import pytest

from cspkit.mmh import MmhParams, mmh_system

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def mmh_params():
    return MmhParams(kappa=1.0, lam=0.5)


@pytest.fixture(scope="session")
def mmh(mmh_params):
    return mmh_system(mmh_params)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
