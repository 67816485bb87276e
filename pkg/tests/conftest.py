import numpy as np
import pytest

from resrecon.grid import FieldGrid, center_library
from resrecon.synth import StratificationParams, generate_library


@pytest.fixture(scope="session")
def grid():
    return FieldGrid.triangular()


@pytest.fixture(scope="session")
def small_grid():
    # 6 columns x 4 layers, depth growing towards the dam
    mask = np.zeros((4, 6), dtype=bool)
    for i, d in enumerate([1, 2, 2, 3, 4, 4]):
        mask[:d, i] = True
    return FieldGrid(6, 4, 100.0, 1.0, mask)


@pytest.fixture(scope="session")
def library(grid):
    spread = {"thermocline_depth": (8.0, 16.0)}
    return generate_library(grid, StratificationParams(), 50, spread, seed=3)


@pytest.fixture(scope="session")
def centered(library):
    return center_library(library)


CRITERIA = {}


@pytest.fixture
def criterion():
    """Record ``(number, passed, detail)`` for the acceptance summary."""

    def record(number, passed, detail):
        CRITERIA[number] = (bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        passed, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
