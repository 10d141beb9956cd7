import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from robin_sqp import Discretization, Iterate, example_problem, run_continuation  # noqa: E402
from robin_sqp.pde import solve_adjoint, solve_state  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    lines = sys.modules.get("test_acceptance")
    lines = getattr(lines, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


def feasible_iterate(disc, u):
    """State and adjoint of a given control packed as an Iterate."""
    u = np.asarray(u, dtype=float)
    y = solve_state(disc, u)
    phi = solve_adjoint(disc, y, u)
    return Iterate(y, phi, u, disc.objective(y, u), disc.level)


@pytest.fixture(scope="session")
def disc2():
    return Discretization.at_level(example_problem(2), 2)


@pytest.fixture(scope="session")
def disc3():
    return Discretization.at_level(example_problem(2), 3)


@pytest.fixture(scope="session")
def continuation_2d():
    """Converged example problem on levels 2..4 in two dimensions."""
    return run_continuation(example_problem(2), 2, 4)
