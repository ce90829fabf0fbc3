import numpy as np
import pytest

from gpscatter.spectral import PHYSICAL, Field, make_grid


def gaussian(grid, amplitude=1.0, width=2.0, modulation=0.0):
    f = amplitude * np.exp(-grid.r2 / (2 * width**2)) * np.exp(1j * modulation * grid.coords[0])
    return Field(grid, f * np.ones(grid.shape), PHYSICAL)


def random_field(grid, rng, smooth=None):
    a = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    f = Field(grid, a, PHYSICAL)
    if smooth is not None:
        g = f.spectral().values * np.exp(-(grid.kabs / smooth) ** 2)
        f = Field(grid, grid.inv(g), PHYSICAL)
    return f


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid2():
    return make_grid(2, 64, 2 * np.pi * 4)


@pytest.fixture
def grid3():
    return make_grid(3, 16, 2 * np.pi * 2)


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Record one status line per acceptance criterion for the terminal summary."""

    def log(n, ok, detail):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE_LINES.append((n, line))
        return ok

    return log


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
