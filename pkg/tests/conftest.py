import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from bathdisc.spectral import Tabulated

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def tabulated_densities(draw, min_points=3, max_points=8):
    """Random piecewise-linear densities on a random finite support."""
    n = draw(st.integers(min_points, max_points))
    a = draw(st.floats(-3.0, 1.0))
    width = draw(st.floats(0.5, 4.0))
    steps = draw(st.lists(st.floats(0.2, 1.0), min_size=n - 1, max_size=n - 1))
    grid = a + width * np.concatenate([[0.0], np.cumsum(steps)]) / np.sum(steps)
    values = draw(st.lists(st.floats(0.05, 3.0), min_size=n, max_size=n))
    return Tabulated(grid, np.array(values))


def random_tabulated(rng, n_points=6):
    grid = np.sort(rng.uniform(-2, 2, n_points))
    grid[0], grid[-1] = -2.0, 2.0
    grid = np.unique(grid)
    return Tabulated(grid, rng.uniform(0.1, 2.0, grid.size))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one pass/fail line for an acceptance criterion."""
    def _report(number, title, ok, detail):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
