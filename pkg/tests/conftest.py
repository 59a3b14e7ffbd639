import numpy as np
import pytest

from fictitious_control import CoupledSystem


def random_system(m, c, seed=0, d=None, **kw):
    rng = np.random.default_rng(seed)
    d = np.ones(m) if d is None else d
    return CoupledSystem.one_dimensional(d, rng.uniform(-1, 1, (m, m)), rng.uniform(-1, 1, (m, m)), c, **kw)


@pytest.fixture
def m5c3():
    return random_system(5, 3, seed=11)


@pytest.fixture
def m4c3():
    return random_system(4, 3, seed=7)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
