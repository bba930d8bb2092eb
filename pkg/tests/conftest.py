import numpy as np
import pytest

from volforms.grid import make_grid

# lines recorded by tests/test_acceptance.py, echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid1():
    return make_grid(1, 32, 33)


@pytest.fixture
def grid2():
    return make_grid(2, 16, 17)
