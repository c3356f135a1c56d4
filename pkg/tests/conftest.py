import numpy as np
import pytest

from alh.lattice import LatticeState, Window, random_state


@pytest.fixture
def seeded():
    return random_state(32, seed=42, amplitude=0.1)


@pytest.fixture
def single_site():
    """q_0 = 0.2, r_0 = 0.1 and nothing else."""
    w = Window(-4, 4)
    q = np.zeros(9, complex)
    r = np.zeros(9, complex)
    q[w.index(0)] = 0.2
    r[w.index(0)] = 0.1
    return LatticeState(w, q, r)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
