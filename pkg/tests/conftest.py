import numpy as np
import pytest

from kktnet.problem import KktPoint, ProblemInstance

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def box_lp():
    """min -x1 - x2 s.t. x <= (1, 1); optimum at the corner (1, 1)."""
    return ProblemInstance.lp(np.eye(2), [1.0, 1.0], [-1.0, -1.0])


@pytest.fixture
def box_lp_point():
    return KktPoint([2.0, 2.0], [-1.0, 0.5])
